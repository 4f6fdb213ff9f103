"""Fixed-step integration, dense least squares and distance helpers."""
from __future__ import annotations

from typing import Callable

import numpy as np


class DivergenceError(FloatingPointError):
    def __init__(self, t: float):
        super().__init__(f"state became non-finite at t={t:.6g} s")
        self.t = t


class ConditioningError(np.linalg.LinAlgError):
    pass


def rk4_step(deriv: Callable, t: float, x: np.ndarray, h: float) -> np.ndarray:
    k1 = deriv(t, x)
    k2 = deriv(t + 0.5 * h, x + 0.5 * h * k1)
    k3 = deriv(t + 0.5 * h, x + 0.5 * h * k2)
    k4 = deriv(t + h, x + h * k3)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def rk4_integrate(deriv: Callable, x0, t0: float, t1: float, dt: float,
                  *, stride: int = 1):
    """Classical fixed-step RK4 from ``t0`` to exactly ``t1``.

    Returns ``(times, states)``; ``states[k]`` is the state at ``times[k]``.
    The last step is shortened when ``(t1 - t0)`` is not a multiple of ``dt``.
    With ``stride > 1`` only every ``stride``-th step (plus the endpoints) is
    stored.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if t1 <= t0:
        raise ValueError("t1 must exceed t0")
    x = np.array(x0, dtype=float)
    n_full = int(np.floor((t1 - t0) / dt + 1e-9))
    rest = (t1 - t0) - n_full * dt
    if rest < 1e-12 * max(1.0, abs(t1)):
        rest = 0.0
    times = [t0]
    states = [x.copy()]
    for k in range(n_full):
        t = t0 + k * dt
        x = rk4_step(deriv, t, x, dt)
        if not np.all(np.isfinite(x)):
            raise DivergenceError(t + dt)
        last = k + 1 == n_full and not rest
        if (k + 1) % stride == 0 or last:
            times.append(t1 if last else t0 + (k + 1) * dt)
            states.append(x.copy())
    if rest:
        x = rk4_step(deriv, t0 + n_full * dt, x, rest)
        if not np.all(np.isfinite(x)):
            raise DivergenceError(t1)
        times.append(t1)
        states.append(x.copy())
    return np.asarray(times), np.asarray(states)


def least_squares(A, b, cond_limit: float = 1e12) -> np.ndarray:
    """Minimiser of ``||A x - b||_2`` via Householder QR."""
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    if A.ndim != 2 or b.shape != (A.shape[0],):
        raise ValueError(f"shape mismatch: A{A.shape}, b{b.shape}")
    n, k = A.shape
    if n < k:
        raise ValueError("underdetermined system (n < k)")
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
        raise ValueError("non-finite entries in least-squares problem")
    q, r = np.linalg.qr(A, mode="reduced")
    diag = np.abs(np.diag(r))
    if diag.min() == 0.0:
        raise ConditioningError("matrix is rank deficient")
    cond = np.linalg.cond(r)
    if not np.isfinite(cond) or cond > cond_limit:
        raise ConditioningError(f"condition number {cond:.3g} exceeds {cond_limit:.0e}")
    from scipy.linalg import solve_triangular

    return solve_triangular(r, q.T @ b)


def pairwise_sq_distances(points) -> np.ndarray:
    x = np.asarray(points, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    diff = x[:, None, :] - x[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def median_pairwise_sq_distance(points) -> float:
    """Median over the unordered pairs ``i < j`` of ``||x_i - x_j||^2``."""
    x = np.asarray(points, dtype=float)
    if x.shape[0] < 2:
        raise ValueError("need at least two points")
    d2 = pairwise_sq_distances(x)
    iu = np.triu_indices(x.shape[0], k=1)
    return float(np.median(d2[iu]))
