"""SINDy baseline on the fixed swing-equation library ``[P_m, domega, sin delta]``.

Only the frequency row is regressed; ``d delta/dt = domega`` holds by
construction of the model.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .diffcore import least_squares
from .gridsim.dataset import Dataset

FEATURES = ("P_m", "domega", "sin_delta")


class NonPhysicalFit(ValueError):
    pass


@dataclass(frozen=True)
class SindyFit:
    xi: np.ndarray          # coefficients for FEATURES
    lam: np.ndarray         # (m, d, B)
    residual_norm: float

    @property
    def m(self) -> float:
        return float(self.lam[0])

    @property
    def d(self) -> float:
        return float(self.lam[1])

    @property
    def B(self) -> float:
        return float(self.lam[2])


def finite_diff(x, t) -> np.ndarray:
    """Derivative samples on a uniform grid (second order everywhere).

    Central differences inside, one-sided three-point stencils at both ends.
    Works column-wise on 2-D input.
    """
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    n = len(t)
    if n < 3 or x.shape[0] != n:
        raise ValueError("need at least three samples matching the time grid")
    dt = np.diff(t)
    h = dt.mean()
    if not np.allclose(dt, h, rtol=1e-9, atol=1e-12 * max(1.0, abs(t[-1]))):
        raise ValueError("finite_diff requires a uniform time grid")
    out = np.empty_like(x)
    out[1:-1] = (x[2:] - x[:-2]) / (2 * h)
    out[0] = (-3 * x[0] + 4 * x[1] - x[2]) / (2 * h)
    out[-1] = (3 * x[-1] - 4 * x[-2] + x[-3]) / (2 * h)
    return out


def dataset_derivatives(data: Dataset) -> np.ndarray:
    """``(d delta/dt, d domega/dt)`` at the sample times, shape (N, 2)."""
    return finite_diff(data.states(), data.t)


def library(data: Dataset) -> np.ndarray:
    return np.column_stack([data.P_m, data.domega, np.sin(data.delta)])


def recover(xi) -> np.ndarray:
    """``(m, d, B)`` from the frequency-row coefficients."""
    xi = np.asarray(xi, dtype=float)
    if not xi[0] > 0:
        raise NonPhysicalFit(f"coefficient of P_m is {xi[0]:.3g}; inertia would be non-positive")
    return np.array([1.0 / xi[0], -xi[1] / xi[0], -xi[2] / xi[0]])


def stlsq(Z: np.ndarray, y: np.ndarray, nu: float, max_iter: int = 10) -> np.ndarray:
    """Sequentially thresholded least squares."""
    xi = least_squares(Z, y)
    for _ in range(max_iter):
        keep = np.abs(xi) >= nu
        new = np.zeros_like(xi)
        if keep.any():
            new[keep] = least_squares(Z[:, keep], y)
        if np.array_equal(new, xi):
            break
        xi = new
    return xi


def sindy_fit(data: Dataset, nu: float = 0.0, derivatives=None) -> SindyFit:
    """Regress ``d domega/dt`` on the library.  ``derivatives`` (N,) or
    (N, 2) overrides the finite-difference estimate."""
    if nu < 0:
        raise ValueError("nu must be non-negative")
    if derivatives is None:
        y = dataset_derivatives(data)[:, 1]
    else:
        derivatives = np.asarray(derivatives, dtype=float)
        y = derivatives[:, 1] if derivatives.ndim == 2 else derivatives
    Z = library(data)
    xi = least_squares(Z, y) if nu == 0 else stlsq(Z, y, nu)
    res = float(np.linalg.norm(Z @ xi - y))
    return SindyFit(xi, recover(xi), res)
