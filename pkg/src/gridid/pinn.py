"""Deterministic PINN baseline: one network plus a point estimate of (m, d, B).

The loss is the sum of four root-mean-square terms, data misfit per state
channel plus physics residual per equation, all in normalised units.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import bpinn, kernels, surrogate
from .bpinn import Layout, OptState, softplus_inv
from .diffcore import Rng
from .gridsim.dataset import Dataset, Normalization


class PinnDivergence(FloatingPointError):
    def __init__(self, iteration: int):
        super().__init__(f"PINN loss became non-finite at iteration {iteration}")
        self.iteration = iteration


@dataclass(frozen=True)
class PinnSettings:
    step: float = 5e-2
    optimizer: str = "adam"
    decay: float = 0.999
    momentum: float = 0.9
    fudge: float = 1e-8
    lam_rate: float = 1.0
    data_weight: float = 1.0
    residual_weight: float = 1.0
    init_lam: float = 1.0
    freeze_lam: bool = False
    backtrack: bool = False  # reject loss increases by halving the step

    def __post_init__(self):
        if self.optimizer not in bpinn.OPTIMIZERS:
            raise ValueError(f"optimizer must be one of {bpinn.OPTIMIZERS}")
        if not self.step > 0 or self.data_weight < 0 or self.residual_weight < 0:
            raise ValueError("bad step or weights")


@dataclass
class PinnEstimate:
    params: surrogate.MlpParams
    lam: np.ndarray
    data_rmse: np.ndarray      # (delta, domega)
    residual_rmse: np.ndarray  # (h_delta, h_omega), normalised units
    norm: Normalization
    iterations: int = 0
    trace: list = field(default_factory=list)

    @property
    def loss(self) -> float:
        return float(self.data_rmse.sum() + self.residual_rmse.sum())

    def vector(self) -> np.ndarray:
        """Particle-layout vector (noise entries zero) for the shared kernels."""
        return np.concatenate([self.params.flatten(), softplus_inv(self.lam), np.zeros(4)])

    def save(self, path) -> Path:
        return surrogate.save_checkpoint(path, self.params, self.norm, {
            "kind": "pinn",
            "lambda": {n: float(v) for n, v in zip(bpinn.LAMBDA_NAMES, self.lam)},
            "data_rmse": self.data_rmse.tolist(),
            "residual_rmse": self.residual_rmse.tolist(),
            "iterations": self.iterations,
        })

    @classmethod
    def load(cls, path) -> "PinnEstimate":
        params, norm, doc = surrogate.load_checkpoint(path)
        lam = np.array([doc["lambda"][n] for n in bpinn.LAMBDA_NAMES])
        return cls(params, lam, np.array(doc["data_rmse"]), np.array(doc["residual_rmse"]),
                   norm, int(doc["iterations"]))


def _loss_terms(X, prob: bpinn.Problem, hidden: int, s: PinnSettings, want_grad=True):
    """Per-channel RMSE (1, 4) and the gradient of the weighted sum."""
    counts = np.array([prob.n_data, prob.n_data, prob.n_points, prob.n_points], dtype=float)
    sse, _ = kernels.sse_grad(X, hidden, prob.tau, prob.pin, prob.p_phys, prob.targets,
                              prob.consts, np.zeros((X.shape[0], 4)), want_grad=False)
    rmse = np.sqrt(sse / counts)
    if not want_grad:
        return rmse, None
    cw = np.array([s.data_weight, s.data_weight, s.residual_weight, s.residual_weight])
    # d sqrt(sse/n) = d sse / (2 sqrt(n sse)); the kernel halves the weights
    with np.errstate(divide="ignore"):
        w = np.where(sse > 0, cw / np.sqrt(counts * sse), 0.0)
    _, G = kernels.sse_grad(X, hidden, prob.tau, prob.pin, prob.p_phys, prob.targets,
                            prob.consts, w)
    return rmse, G


def _weighted(rmse, s: PinnSettings) -> float:
    return float(s.data_weight * rmse[0, :2].sum() + s.residual_weight * rmse[0, 2:].sum())


def pinn_fit(data: Dataset, colloc_count: int = 0, iters: int = 2000, rng: Rng | None = None,
             hidden: int = surrogate.DEFAULT_HIDDEN, settings: PinnSettings = PinnSettings(),
             init: PinnEstimate | None = None, callback=None) -> PinnEstimate:
    """Minimise data RMSE + residual RMSE over (theta, lambda)."""
    if data.n < 2:
        raise ValueError("pinn_fit needs at least two samples")
    rng = Rng(0) if rng is None else rng
    prob = bpinn.make_problem(data, colloc_count, residual_units="normalized")
    L = Layout(hidden)
    if init is not None:
        if init.params.hidden != hidden:
            raise bpinn.ArchitectureError("initial estimate has a different hidden size")
        x = init.vector()
    else:
        theta = surrogate.init_params(rng.child("pinn"), "small_uniform", hidden).flatten()
        x = np.concatenate([theta, softplus_inv(np.full(3, settings.init_lam)), np.zeros(4)])
    X = x[None, :].copy()
    rates = np.ones(L.dim)
    rates[L.lam] = 0.0 if settings.freeze_lam else settings.lam_rate
    rates[L.n_theta + 3:] = 0.0
    state = OptState()
    trace = []
    scale = 1.0
    rmse, G = _loss_terms(X, prob, hidden, settings)
    for it in range(iters):
        loss = _weighted(rmse, settings)
        if not np.isfinite(loss) or not np.all(np.isfinite(G)):
            raise PinnDivergence(it)
        trace.append(loss)
        step = state.update(-G, settings) * rates
        if settings.backtrack:
            for _ in range(40):
                trial = X + scale * step
                r_trial, _ = _loss_terms(trial, prob, hidden, settings, want_grad=False)
                if _weighted(r_trial, settings) <= loss:
                    break
                scale *= 0.5
            else:
                trial = X
        else:
            trial = X + step
        X = trial
        rmse, G = _loss_terms(X, prob, hidden, settings)
        if callback is not None:
            callback(it + 1, X[0], rmse[0])
    if not np.all(np.isfinite(rmse)):
        raise PinnDivergence(iters)
    x = X[0]
    return PinnEstimate(surrogate.MlpParams.from_flat(x[:L.n_theta], hidden),
                        np.logaddexp(0.0, x[L.lam]), rmse[0, :2].copy(), rmse[0, 2:].copy(),
                        data.norm, iters, trace)


def predict(est: PinnEstimate, times, P_m) -> np.ndarray:
    """Network states in normalised units, shape (N, 2)."""
    times = np.asarray(times, dtype=float)
    P = np.broadcast_to(np.asarray(P_m, dtype=float), times.shape)
    y, _ = kernels.predict(est.vector()[None, :], est.params.hidden,
                           est.norm.encode("t", times), est.norm.encode("P_m", P))
    return y[0]


def settings_dict(s: PinnSettings) -> dict:
    return asdict(s)
