"""One-hidden-layer tanh surrogate ``(t, P_m) -> (delta, domega)``.

Parameters are kept as a flat vector with layout::

    W1 (H x 2, row-major) | b1 (H) | W2 (2 x H, row-major) | b2 (2)

Column 0 of ``W1`` multiplies the (normalised) time input, column 1 the
(normalised) mechanical-power input.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .diffcore import Rng, autodiff as ad
from .gridsim.dataset import Normalization

DEFAULT_HIDDEN = 20
ACTIVATION = "tanh"


def n_params(hidden: int = DEFAULT_HIDDEN) -> int:
    return 5 * hidden + 2


@dataclass(frozen=True)
class MlpParams:
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray

    def __post_init__(self):
        h = self.b1.shape[0]
        if self.W1.shape != (h, 2) or self.W2.shape != (2, h) or self.b2.shape != (2,):
            raise ValueError("inconsistent layer shapes")
        if not all(np.all(np.isfinite(a)) for a in (self.W1, self.b1, self.W2, self.b2)):
            raise ValueError("non-finite network parameter")

    @property
    def hidden(self) -> int:
        return self.b1.shape[0]

    def flatten(self) -> np.ndarray:
        return np.concatenate([self.W1.ravel(), self.b1, self.W2.ravel(), self.b2])

    @classmethod
    def from_flat(cls, vec, hidden: int = DEFAULT_HIDDEN) -> "MlpParams":
        vec = np.asarray(vec, dtype=float)
        if vec.shape != (n_params(hidden),):
            raise ValueError(f"expected {n_params(hidden)} parameters, got {vec.shape}")
        W1, b1, W2, b2 = split(vec, hidden)
        return cls(W1.copy(), b1.copy(), W2.copy(), b2.copy())


def split(vec, hidden: int):
    """Views ``(W1, b1, W2, b2)`` into a flat vector (ndarray or ``Var``)."""
    h = hidden
    W1 = vec[0:2 * h].reshape(h, 2)
    b1 = vec[2 * h:3 * h]
    W2 = vec[3 * h:5 * h].reshape(2, h)
    b2 = vec[5 * h:5 * h + 2]
    return W1, b1, W2, b2


def apply(layers, tau, p):
    """Network output for inputs of shape ``(N,)``; returns ``(N, 2)``.

    Works for any mix of ndarray / ``Var`` / ``Dual`` inputs and weights.
    """
    W1, b1, W2, b2 = layers
    z = tau[:, None] * W1.T[0] + p[:, None] * W1.T[1] + b1
    a = ad.tanh(z)
    return a @ W2.T + b2


def _layers(params):
    if isinstance(params, MlpParams):
        return params.W1, params.b1, params.W2, params.b2
    return params


def forward(params, t, P_m) -> np.ndarray:
    """``(delta_hat, domega_hat)`` in normalised units for normalised inputs."""
    tau = np.atleast_1d(np.asarray(t, dtype=float))
    p = np.broadcast_to(np.asarray(P_m, dtype=float), tau.shape)
    out = apply(_layers(params), tau, p)
    return out[0] if np.ndim(t) == 0 else out


def time_derivative(params, t, P_m, time_scale: float = 1.0) -> np.ndarray:
    """d/dt of :func:`forward`, where normalised time is ``t_phys / time_scale``.

    Computed by forward accumulation with a unit tangent on the time input.
    """
    tau = np.atleast_1d(np.asarray(t, dtype=float))
    p = np.broadcast_to(np.asarray(P_m, dtype=float), tau.shape)
    layers = _layers(params)
    dy = ad.directional_derivative(lambda x: apply(layers, x, p), tau, np.ones_like(tau))
    dy = dy / time_scale
    return dy[0] if np.ndim(t) == 0 else dy


def init_params(rng: Rng, scheme: str = "prior_sample", hidden: int = DEFAULT_HIDDEN,
                sigma_w: float = 1.0, sigma_b: float = 1.0) -> MlpParams:
    if scheme == "prior_sample":
        return MlpParams(rng.normal(0.0, sigma_w, (hidden, 2)), rng.normal(0.0, sigma_b, hidden),
                         rng.normal(0.0, sigma_w, (2, hidden)), rng.normal(0.0, sigma_b, 2))
    if scheme == "small_uniform":
        s_in, s_out = 2 ** -0.5, hidden ** -0.5
        return MlpParams(rng.uniform(-0.5, 0.5, (hidden, 2)) * s_in,
                         rng.uniform(-0.5, 0.5, hidden) * s_in,
                         rng.uniform(-0.5, 0.5, (2, hidden)) * s_out,
                         rng.uniform(-0.5, 0.5, 2) * s_out)
    raise ValueError(f"unknown init scheme {scheme!r}")


def save_checkpoint(path, params: MlpParams, norm: Normalization, extra: dict | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    doc = {
        "kind": "surrogate",
        "activation": ACTIVATION,
        "output_head": "linear",
        "layers": [[2, params.hidden], [params.hidden, 2]],
        "theta": params.flatten().tolist(),
        "norm": norm.to_dict(),
    }
    if extra:
        doc.update(extra)
    path.write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")
    return path


def load_checkpoint(path):
    doc = json.loads(Path(path).read_text())
    hidden = int(doc["layers"][0][1])
    return MlpParams.from_flat(doc["theta"], hidden), Normalization.from_dict(doc["norm"]), doc
