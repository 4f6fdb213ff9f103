"""Frequency-dynamics simulation of inverter-rich grids and identification of
aggregated swing parameters (inertia, damping, susceptance)."""

__version__ = "0.1.0"
