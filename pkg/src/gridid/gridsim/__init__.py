"""Power-system simulation and dataset generation."""
from .dataset import CHANNELS, Dataset, Normalization
from .model import (OMEGA_B, PM_READINGS, Device, Dynamics, SteadyStateError, SyncGenParams,
                    SynchronverterParams, SystemModel, Trajectory, auto_dt, simulate, steady_state)
from .network import Network, NetworkError, ReducedNetwork, reduce
from .sampling import CHANNEL_MODES, measured_states, sample_dataset
from .scenarios import DYNAMICS, GRIDS, ScenarioError, build_scenario, grid_description

__all__ = [
    "CHANNELS", "CHANNEL_MODES", "DYNAMICS", "Dataset", "Device", "Dynamics", "GRIDS",
    "Network", "NetworkError", "Normalization", "OMEGA_B", "PM_READINGS", "ReducedNetwork",
    "ScenarioError", "SteadyStateError", "SyncGenParams", "SynchronverterParams",
    "SystemModel", "Trajectory", "auto_dt", "build_scenario", "grid_description",
    "measured_states", "reduce", "sample_dataset", "simulate", "steady_state",
]
