"""Turning a simulated trajectory into a measurement dataset."""
from __future__ import annotations

import numpy as np

from ..diffcore import Rng
from .dataset import Dataset, Normalization
from .model import Trajectory

CHANNEL_MODES = ("G1", "coi")


def measured_states(traj: Trajectory, channel: str = "G1"):
    """``(delta, domega)`` of the monitored signal, delta relative to its
    pre-step value."""
    if channel == "G1":
        return traj.delta[:, 0] - traj.delta0[0], traj.domega[:, 0]
    if channel == "coi":
        w = traj.gen_inertia / traj.gen_inertia.sum()
        return (traj.delta - traj.delta0) @ w, traj.domega @ w
    raise ValueError(f"channel must be one of {CHANNEL_MODES}")


def sample_dataset(traj: Trajectory, rate: float = 20.0, T: float = 5.0, noise_sigma: float = 0.0,
                   rng: Rng | None = None, channel: str = "G1") -> Dataset:
    """Uniform samples ``t = 0, 1/rate, ...`` strictly below ``T``."""
    if not rate > 0 or not T > 0:
        raise ValueError("rate and T must be positive")
    n = int(round(rate * T))
    if n < 2:
        raise ValueError("rate * T must give at least two samples")
    if T > traj.horizon + 1e-9:
        raise ValueError(f"T={T} exceeds the trajectory horizon {traj.horizon}")
    k = int(round(1.0 / (rate * traj.record_dt)))
    if k < 1 or abs(k * traj.record_dt * rate - 1.0) > 1e-9:
        raise ValueError("sampling period must be an integer multiple of the trajectory step")
    idx = np.arange(n) * k
    if idx[-1] >= len(traj.times):
        raise ValueError("trajectory too short for the requested sampling")
    delta, domega = measured_states(traj, channel)
    t = traj.times[idx]
    d = delta[idx].copy()
    w = domega[idx].copy()
    if noise_sigma < 0:
        raise ValueError("noise_sigma must be non-negative")
    if noise_sigma > 0:
        if rng is None:
            raise ValueError("noisy sampling needs an rng")
        r = rng.child("noise")
        d = d + r.normal(0.0, noise_sigma, n)
        w = w + r.normal(0.0, noise_sigma, n)
    P = traj.P_m[idx].copy()
    norm = Normalization.fit({"t": t, "P_m": P, "delta": d, "domega": w})
    meta = {
        "T": float(T), "rate": float(rate), "x0": [0.0, 0.0], "scenario": traj.label,
        "channel": channel, "P_m": float(traj.meta.get("P_m", P[0])),
        "P_m0": float(traj.meta.get("P_m0", 0.0)), "reading": traj.meta.get("reading", "absolute"),
        "seed": None if rng is None else rng.seed, "noise_sigma": float(noise_sigma),
    }
    return Dataset(t, P, d, w, norm, noise_sigma=float(noise_sigma), meta=meta)
