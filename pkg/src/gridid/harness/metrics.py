"""Reconstruction of a dataset from estimated swing parameters, and MAPE."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..diffcore import rk4_integrate
from ..gridsim.dataset import Dataset

MAPE_FLOOR = 1e-3


@dataclass(frozen=True)
class Reconstruction:
    t: np.ndarray
    delta: np.ndarray
    domega: np.ndarray
    settles: bool   # an equilibrium exists for the post-step power

    def states(self) -> np.ndarray:
        return np.column_stack([self.delta, self.domega])


def smib_rhs(lam, P_m):
    m, d, B = (float(v) for v in lam)

    def f(t, x):
        return np.array([x[1], (P_m - d * x[1] - B * np.sin(x[0])) / m])
    return f


def reconstruct(lam, data: Dataset, dt: float = 1e-3) -> Reconstruction:
    """Integrate the swing model with ``lam = (m, d, B)`` from the dataset's
    initial condition under its post-step power; sampled at ``data.t``."""
    lam = np.asarray(lam, dtype=float)
    if lam.shape != (3,) or not np.all(lam > 0):
        raise ValueError("lambda must be three positive numbers")
    P = data.step_P_m
    x0 = np.asarray(data.x0, dtype=float)
    t_end = float(data.t[-1])
    if t_end <= 0:
        raise ValueError("dataset must span positive time")
    # integrate on a grid that hits every sample instant
    step = float(np.min(np.diff(data.t)))
    k = max(1, int(np.ceil(step / dt)))
    h = step / k
    times, X = rk4_integrate(smib_rhs(lam, P), x0, 0.0, t_end, h, stride=k)
    grid = np.round(data.t / step).astype(int)
    if not np.allclose(times[grid], data.t, atol=1e-9):
        raise ValueError("reconstruction needs uniformly sampled data starting at t = 0")
    X = X[grid]
    return Reconstruction(data.t.copy(), X[:, 0], X[:, 1], bool(abs(P) <= lam[2]))


def reconstruct_batch(lams, data: Dataset, dt: float = 1e-3) -> np.ndarray:
    """Reconstructions for many ``(m, d, B)`` rows at once, shape (P, N, 2).

    Rows that leave the finite range come back as NaN instead of raising.
    """
    lams = np.atleast_2d(np.asarray(lams, dtype=float))
    if lams.shape[1] != 3 or not np.all(lams > 0):
        raise ValueError("lambda rows must be three positive numbers")
    m, d, B = lams.T
    P = data.step_P_m
    step = float(np.min(np.diff(data.t)))
    k = max(1, int(np.ceil(step / dt)))
    h = step / k
    n = int(round(data.t[-1] / step))
    x = np.tile(np.asarray(data.x0, dtype=float), (len(lams), 1))

    def f(x):
        return np.column_stack([x[:, 1], (P - d * x[:, 1] - B * np.sin(x[:, 0])) / m])

    out = np.empty((len(lams), n + 1, 2))
    out[:, 0] = x
    with np.errstate(over="ignore", invalid="ignore"):
        for j in range(n):
            for _ in range(k):
                k1 = f(x)
                k2 = f(x + 0.5 * h * k1)
                k3 = f(x + 0.5 * h * k2)
                k4 = f(x + h * k3)
                x = x + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
            out[:, j + 1] = x
    grid = np.round(data.t / step).astype(int)
    return out[:, grid]


def mape(x, x_hat, floor: float | None = MAPE_FLOOR, scale: float = 1.0) -> float:
    """Mean absolute percentage error.  Denominators are floored at
    ``floor * scale`` (``scale`` maps normalised units to the data's units);
    ``floor=None`` disables the guard."""
    x = np.asarray(x, dtype=float)
    x_hat = np.asarray(x_hat, dtype=float)
    if x.shape != x_hat.shape:
        raise ValueError("x and x_hat must have equal shapes")
    if x.size == 0:
        raise ValueError("mape of an empty sample")
    den = np.abs(x)
    if floor is not None:
        den = np.maximum(den, floor * scale)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.abs(x - x_hat) / den
    return float(100.0 * np.mean(r))


def dataset_mape(data: Dataset, rec: Reconstruction, floor: float | None = MAPE_FLOOR) -> dict:
    return {
        "delta": mape(data.delta, rec.delta, floor, data.norm.scale["delta"]),
        "domega": mape(data.domega, rec.domega, floor, data.norm.scale["domega"]),
    }
