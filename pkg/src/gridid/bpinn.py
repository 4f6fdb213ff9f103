"""Bayesian PINN: priors, physics-regularised likelihood and SVGD inference.

A particle is a flat vector::

    theta (5H+2) | u_m, u_d, u_B | log sx_delta, log sx_omega | log sh_delta, log sh_omega

with ``(m, d, B) = softplus(u)``.  ``sx`` are the measurement noise scales
(normalised units), ``sh`` the residual scales (physical units).
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.special import gammaln

from . import kernels, surrogate
from .diffcore import Rng, autodiff as ad, median_pairwise_sq_distance, pairwise_sq_distances
from .gridsim.dataset import Dataset, Normalization

LAMBDA_NAMES = ("m", "d", "B")
LOG2PI = math.log(2.0 * math.pi)


class ArchitectureError(ValueError):
    pass


class SvgdDivergence(FloatingPointError):
    def __init__(self, particle: int, iteration: int):
        super().__init__(f"non-finite gradient for particle {particle} at iteration {iteration}")
        self.particle = particle
        self.iteration = iteration


@dataclass(frozen=True)
class PriorConfig:
    sigma_w: float = 1.0
    sigma_b: float = 1.0
    mu: float = 1.0
    kappa: float = 25.0
    alpha: float = 1.0  # gamma shape
    beta: float = 1.0   # gamma rate
    noise_scale: float = 1.0  # half-Cauchy scale of sx and sh

    def __post_init__(self):
        for name in ("sigma_w", "sigma_b", "kappa", "alpha", "beta", "noise_scale"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    @property
    def t_df(self) -> float:
        return 2.0 * self.alpha

    @property
    def t_scale(self) -> float:
        return math.sqrt(self.beta * self.kappa / self.alpha)


@dataclass(frozen=True)
class Layout:
    hidden: int = surrogate.DEFAULT_HIDDEN

    @property
    def n_theta(self) -> int:
        return surrogate.n_params(self.hidden)

    @property
    def lam(self) -> slice:
        return slice(self.n_theta, self.n_theta + 3)

    @property
    def log_sx(self) -> slice:
        return slice(self.n_theta + 3, self.n_theta + 5)

    @property
    def log_sh(self) -> slice:
        return slice(self.n_theta + 5, self.n_theta + 7)

    @property
    def dim(self) -> int:
        return self.n_theta + 7

    def weight_mask(self) -> np.ndarray:
        """True for weights, False for biases, over the theta block."""
        h = self.hidden
        mask = np.zeros(self.n_theta, dtype=bool)
        mask[:2 * h] = True
        mask[3 * h:5 * h] = True
        return mask


@dataclass(frozen=True)
class Particle:
    theta: np.ndarray
    u: np.ndarray
    log_sigma_x: np.ndarray
    log_sigma_h: np.ndarray

    @property
    def lam(self) -> np.ndarray:
        return np.logaddexp(0.0, self.u)

    @property
    def hidden(self) -> int:
        return (len(self.theta) - 2) // 5

    def vector(self) -> np.ndarray:
        return np.concatenate([self.theta, self.u, self.log_sigma_x, self.log_sigma_h])

    @classmethod
    def from_vector(cls, vec, hidden: int = surrogate.DEFAULT_HIDDEN) -> "Particle":
        L = Layout(hidden)
        vec = np.asarray(vec, dtype=float)
        if vec.shape != (L.dim,):
            raise ArchitectureError(f"particle of length {vec.shape} does not match hidden={hidden}")
        return cls(vec[:L.n_theta].copy(), vec[L.lam].copy(), vec[L.log_sx].copy(), vec[L.log_sh].copy())

    @classmethod
    def build(cls, params: surrogate.MlpParams, lam, sigma_x=(1.0, 1.0), sigma_h=(1.0, 1.0)) -> "Particle":
        return cls(params.flatten(), softplus_inv(np.asarray(lam, dtype=float)),
                   np.log(np.asarray(sigma_x, dtype=float)), np.log(np.asarray(sigma_h, dtype=float)))


def softplus_inv(y):
    y = np.asarray(y, dtype=float)
    return y + np.log(-np.expm1(-y))


# ----------------------------------------------------------------------------
# training problem: inputs prepared once per dataset
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class Problem:
    """Network inputs/targets for the data and collocation points."""

    tau: np.ndarray
    pin: np.ndarray
    p_phys: np.ndarray
    targets: np.ndarray
    consts: np.ndarray
    norm: Normalization
    n_data: int
    n_colloc: int
    horizon: float

    @property
    def n_points(self) -> int:
        return self.n_data + self.n_colloc


def collocation_times(horizon: float, count: int) -> np.ndarray:
    if count <= 0:
        return np.empty(0)
    if count == 1:
        return np.array([0.5 * horizon])
    return np.linspace(0.0, horizon, count)


def make_problem(data: Dataset, n_colloc: int = 0, residual_units: str = "physical") -> Problem:
    norm = data.norm
    tc = collocation_times(data.horizon, n_colloc)
    t_all = np.concatenate([data.t, tc])
    p_all = np.concatenate([data.P_m, np.full(len(tc), data.step_P_m)])
    st = norm.scale["t"]
    sd, cd = norm.scale["delta"], norm.shift["delta"]
    sw, cw = norm.scale["domega"], norm.shift["domega"]
    if residual_units == "physical":
        r0, r1 = 1.0, 1.0
    elif residual_units == "normalized":
        r0, r1 = sd / st, sw / st
    else:
        raise ValueError(residual_units)
    return Problem(tau=norm.encode("t", t_all), pin=norm.encode("P_m", p_all), p_phys=p_all,
                   targets=data.normalized_states(),
                   consts=np.array([st, sd, cd, sw, cw, r0, r1]), norm=norm,
                   n_data=data.n, n_colloc=len(tc), horizon=data.horizon)


# ----------------------------------------------------------------------------
# densities (generic: ndarray or Var particle vectors)
# ----------------------------------------------------------------------------


def student_t_logpdf(x, df: float, loc: float, scale: float):
    """Location-scale Student-t log-density (generic over ndarray/Var)."""
    c = (gammaln(0.5 * (df + 1)) - gammaln(0.5 * df)
         - 0.5 * math.log(df * math.pi) - math.log(scale))
    zz = (x - loc) / scale
    return c - 0.5 * (df + 1) * ad.log1p(zz * zz / df)


def log_prior(p, cfg: PriorConfig = PriorConfig(), hidden: int = surrogate.DEFAULT_HIDDEN):
    """Log prior of a particle vector (or :class:`Particle`)."""
    vec = p.vector() if isinstance(p, Particle) else p
    L = Layout(hidden)
    mask = L.weight_mask()
    theta = vec[0:L.n_theta]
    n_w = int(mask.sum())
    n_b = L.n_theta - n_w
    sq = theta * theta
    wsum = (sq * mask.astype(float)).sum()
    bsum = (sq * (~mask).astype(float)).sum()
    lp = (-0.5 * wsum / cfg.sigma_w ** 2 - 0.5 * bsum / cfg.sigma_b ** 2
          - n_w * math.log(cfg.sigma_w) - n_b * math.log(cfg.sigma_b) - 0.5 * L.n_theta * LOG2PI)
    u = vec[L.lam]
    lam = ad.softplus(u)
    lp = lp + student_t_logpdf(lam, cfg.t_df, cfg.mu, cfg.t_scale).sum()
    lp = lp + ad.log(ad.sigmoid(u)).sum()  # d softplus / du
    s = vec[L.n_theta + 3:L.n_theta + 7]
    # half-Cauchy on sigma = exp(s), plus the exp Jacobian
    zz = ad.exp(s) / cfg.noise_scale
    lp = lp + (math.log(2.0 / (math.pi * cfg.noise_scale)) - ad.log1p(zz * zz) + s).sum()
    return lp


def physics_residual(p, t, P_m, norm: Normalization, hidden: int = surrogate.DEFAULT_HIDDEN):
    """``(h_delta, h_omega)`` in physical units at times ``t`` (seconds).

    ``h_delta = d delta/dt - domega`` and
    ``h_omega = d domega/dt - (P_m - d*domega - B*sin(delta)) / m``.
    """
    vec = p.vector() if isinstance(p, Particle) else p
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    P = np.broadcast_to(np.asarray(P_m, dtype=float), t_arr.shape)
    h0, h1 = _residual(vec, norm.encode("t", t_arr), norm.encode("P_m", P), P, norm, hidden)
    if np.ndim(t) == 0 and not isinstance(h0, ad.Var):
        return float(h0[0]), float(h1[0])
    return h0, h1


def _residual(vec, tau, pin, p_phys, norm: Normalization, hidden: int, r0=1.0, r1=1.0,
              with_outputs: bool = False):
    L = Layout(hidden)
    layers = surrogate.split(vec[0:L.n_theta], hidden)
    out = surrogate.apply(layers, ad.Dual(tau, np.ones_like(tau)), pin)
    y, dy = out.val, out.tan
    st = norm.scale["t"]
    delta = y.T[0] * norm.scale["delta"] + norm.shift["delta"]
    omega = y.T[1] * norm.scale["domega"] + norm.shift["domega"]
    ddelta = dy.T[0] * (norm.scale["delta"] / st)
    domega = dy.T[1] * (norm.scale["domega"] / st)
    lam = ad.softplus(vec[L.lam])
    m, d, B = lam[0], lam[1], lam[2]
    h0 = (ddelta - omega) / r0
    h1 = (domega - (p_phys - d * omega - B * ad.sin(delta)) / m) / r1
    if with_outputs:
        return h0, h1, y
    return h0, h1


def log_likelihood(p, data: Dataset, colloc=0, hidden: int = surrogate.DEFAULT_HIDDEN):
    """Gaussian data term over the samples plus Gaussian residual term over
    samples and collocation points.  ``colloc`` is a count or a :class:`Problem`.
    """
    vec = p.vector() if isinstance(p, Particle) else p
    prob = colloc if isinstance(colloc, Problem) else make_problem(data, int(colloc))
    return _log_likelihood(vec, prob, hidden)


def _log_likelihood(vec, prob: Problem, hidden: int):
    L = Layout(hidden)
    h0, h1, y = _residual(vec, prob.tau, prob.pin, prob.p_phys, prob.norm, hidden, with_outputs=True)
    nd = prob.n_data
    r = y[0:nd] - prob.targets
    ls = vec[L.n_theta + 3:L.n_theta + 7]
    ll = 0.0
    for k in range(2):
        rk = r.T[k]
        ll = ll - 0.5 * (rk * rk).sum() * ad.exp(-2.0 * ls[k]) - nd * ls[k]
    n = prob.n_points
    ll = ll - 0.5 * (h0 * h0).sum() * ad.exp(-2.0 * ls[2]) - n * ls[2]
    ll = ll - 0.5 * (h1 * h1).sum() * ad.exp(-2.0 * ls[3]) - n * ls[3]
    return ll - (nd + n) * LOG2PI


def log_joint(vec, prob: Problem, cfg: PriorConfig, hidden: int = surrogate.DEFAULT_HIDDEN):
    """Reference (taped) log joint of one particle vector."""
    return log_prior(vec, cfg, hidden) + _log_likelihood(vec, prob, hidden)


# ----------------------------------------------------------------------------
# batched fast path
# ----------------------------------------------------------------------------


def log_prior_batch(X: np.ndarray, cfg: PriorConfig, hidden: int):
    L = Layout(hidden)
    mask = L.weight_mask()
    th = X[:, :L.n_theta]
    inv_var = np.where(mask, 1.0 / cfg.sigma_w ** 2, 1.0 / cfg.sigma_b ** 2)
    n_w = int(mask.sum())
    lp = (-0.5 * (th * th * inv_var).sum(axis=1)
          - n_w * math.log(cfg.sigma_w) - (L.n_theta - n_w) * math.log(cfg.sigma_b)
          - 0.5 * L.n_theta * LOG2PI)
    G = np.zeros_like(X)
    G[:, :L.n_theta] = -th * inv_var

    u = X[:, L.lam]
    lam = np.logaddexp(0.0, u)
    sig = 0.5 * (1.0 + np.tanh(0.5 * u))
    df, loc, sc = cfg.t_df, cfg.mu, cfg.t_scale
    zz = (lam - loc) / sc
    c = gammaln(0.5 * (df + 1)) - gammaln(0.5 * df) - 0.5 * math.log(df * math.pi) - math.log(sc)
    lp += (c - 0.5 * (df + 1) * np.log1p(zz * zz / df)).sum(axis=1)
    dl = -(df + 1) * zz / (sc * (df + zz * zz))
    lp += np.log(sig).sum(axis=1)
    G[:, L.lam] = dl * sig + (1.0 - sig)

    s = X[:, L.n_theta + 3:L.n_theta + 7]
    e = np.exp(s) / cfg.noise_scale
    lp += (math.log(2.0 / (math.pi * cfg.noise_scale)) - np.log1p(e * e) + s).sum(axis=1)
    G[:, L.n_theta + 3:L.n_theta + 7] = 1.0 - 2.0 * e * e / (1.0 + e * e)
    return lp, G


def log_likelihood_batch(X: np.ndarray, prob: Problem, hidden: int):
    L = Layout(hidden)
    s = X[:, L.n_theta + 3:L.n_theta + 7]
    prec = np.exp(-2.0 * s)
    sse, Gk = kernels.sse_grad(X, hidden, prob.tau, prob.pin, prob.p_phys, prob.targets,
                               prob.consts, prec)
    counts = np.array([prob.n_data, prob.n_data, prob.n_points, prob.n_points], dtype=float)
    ll = (-0.5 * prec * sse - counts * s).sum(axis=1) - (2 * prob.n_data + 2 * prob.n_points) * 0.5 * LOG2PI
    G = -Gk
    G[:, L.n_theta + 3:L.n_theta + 7] = prec * sse - counts
    return ll, G


def log_joint_batch(X: np.ndarray, prob: Problem, cfg: PriorConfig, hidden: int):
    lp, gp = log_prior_batch(X, cfg, hidden)
    ll, gl = log_likelihood_batch(X, prob, hidden)
    return lp + ll, gp + gl


# ----------------------------------------------------------------------------
# SVGD
# ----------------------------------------------------------------------------


def rbf_kernel(X: np.ndarray):
    """Kernel matrix and bandwidth (median heuristic)."""
    P = X.shape[0]
    d2 = pairwise_sq_distances(X)
    if P < 2:
        return np.ones((P, P)), 1.0
    med = median_pairwise_sq_distance(X)
    bw = med / (2.0 * math.log(P + 1)) if med > 0 else 1.0
    return np.exp(-d2 / (2.0 * bw)), bw


def svgd_direction(X: np.ndarray, G: np.ndarray) -> np.ndarray:
    """``phi(x_i) = 1/P sum_j [k(x_j, x_i) grad log p(x_j) + grad_{x_j} k(x_j, x_i)]``."""
    P = X.shape[0]
    K, bw = rbf_kernel(X)
    repulse = (X * K.sum(axis=1)[:, None] - K @ X) / bw
    return (K @ G + repulse) / P


OPTIMIZERS = ("adam", "adagrad")


INITS = ("centred", "prior")


@dataclass(frozen=True)
class SvgdSettings:
    """Optimiser and initialisation knobs.

    ``lam_rate``, ``sx_rate`` and ``sh_rate`` scale the step of the swing
    parameters, the data noise scales and the residual noise scales.  A slow
    residual scale keeps the physics term from freezing the network before
    it has seen the data.

    ``init="centred"`` draws the network from its prior but starts every
    particle's swing parameters at the prior location and its noise scales
    at the half-Cauchy median; ``init="prior"`` draws everything.
    """

    step: float = 2e-2
    optimizer: str = "adam"
    decay: float = 0.999    # squared-gradient averaging factor
    momentum: float = 0.9   # adam only
    fudge: float = 1e-8
    lam_rate: float = 1.0
    sx_rate: float = 1.0
    sh_rate: float = 0.2
    init: str = "centred"

    def __post_init__(self):
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"optimizer must be one of {OPTIMIZERS}")
        if self.init not in INITS:
            raise ValueError(f"init must be one of {INITS}")
        for name in ("step", "lam_rate", "sx_rate", "sh_rate"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    def rates(self, hidden: int) -> np.ndarray:
        L = Layout(hidden)
        r = np.ones(L.dim)
        r[L.lam] = self.lam_rate
        r[L.log_sx] = self.sx_rate
        r[L.log_sh] = self.sh_rate
        return r


@dataclass
class OptState:
    """Per-coordinate accumulators.  ``hist`` holds squared directions,
    ``mom`` the first moment (adam)."""

    hist: np.ndarray | None = None
    mom: np.ndarray | None = None
    steps: int = 0

    def update(self, phi: np.ndarray, s: SvgdSettings) -> np.ndarray:
        self.steps += 1
        if s.optimizer == "adagrad":
            # decayed accumulation as in the reference SVGD code
            if self.hist is None:
                self.hist = phi * phi
            else:
                self.hist = s.decay * self.hist + (1.0 - s.decay) * phi * phi
            return s.step * phi / (s.fudge + np.sqrt(self.hist))
        if self.hist is None:
            self.hist = np.zeros_like(phi)
            self.mom = np.zeros_like(phi)
        self.mom = s.momentum * self.mom + (1.0 - s.momentum) * phi
        self.hist = s.decay * self.hist + (1.0 - s.decay) * phi * phi
        mhat = self.mom / (1.0 - s.momentum ** self.steps)
        vhat = self.hist / (1.0 - s.decay ** self.steps)
        return s.step * mhat / (np.sqrt(vhat) + s.fudge)


def svgd(X0: np.ndarray, grad_logp: Callable, iters: int, settings: SvgdSettings = SvgdSettings(),
         state: OptState | None = None, callback: Callable | None = None, rates=None):
    """Generic SVGD loop.  ``grad_logp(X) -> (logp (P,), grad (P, D))``.

    ``rates`` (D,) optionally scales the step per coordinate.

    ``callback(iteration, X, logp)`` is called after every update.
    Returns ``(X, state, trace)`` with ``trace`` the mean log density per step.
    """
    X = np.array(X0, dtype=float)
    state = OptState() if state is None else state
    trace = []
    for it in range(iters):
        lp, G = grad_logp(X)
        bad = ~np.all(np.isfinite(G), axis=1)
        if bad.any():
            raise SvgdDivergence(int(np.argmax(bad)), it)
        delta = state.update(svgd_direction(X, G), settings)
        X = X + (delta if rates is None else delta * rates)
        trace.append(float(np.mean(lp)))
        if callback is not None:
            callback(it + 1, X, lp)
    return X, state, trace


@dataclass
class Posterior:
    particles: np.ndarray
    norm: Normalization
    prior: PriorConfig = PriorConfig()
    hidden: int = surrogate.DEFAULT_HIDDEN
    iterations: int = 0
    seed: int | None = None
    trace: list = field(default_factory=list)
    opt_hist: np.ndarray | None = None
    opt_mom: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.particles = np.asarray(self.particles, dtype=float)
        if self.particles.shape[1] != Layout(self.hidden).dim:
            raise ArchitectureError("particle width does not match hidden size")

    @property
    def size(self) -> int:
        return self.particles.shape[0]

    @property
    def lam(self) -> np.ndarray:
        return np.logaddexp(0.0, self.particles[:, Layout(self.hidden).lam])

    @property
    def sigma_x(self) -> np.ndarray:
        return np.exp(self.particles[:, Layout(self.hidden).log_sx])

    @property
    def sigma_h(self) -> np.ndarray:
        return np.exp(self.particles[:, Layout(self.hidden).log_sh])

    def particle(self, i: int) -> Particle:
        return Particle.from_vector(self.particles[i], self.hidden)

    def min_pairwise_distance(self) -> float:
        d2 = pairwise_sq_distances(self.particles)
        iu = np.triu_indices(self.size, k=1)
        return float(np.sqrt(d2[iu].min())) if self.size > 1 else float("inf")

    @property
    def collapsed(self) -> bool:
        return self.size > 1 and self.min_pairwise_distance() < 1e-10

    def save(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        doc = {
            "kind": "posterior",
            "activation": surrogate.ACTIVATION,
            "hidden": self.hidden,
            "prior": asdict(self.prior),
            "norm": self.norm.to_dict(),
            "iterations": self.iterations,
            "seed": self.seed,
            "particles": self.particles.tolist(),
            "opt_hist": None if self.opt_hist is None else self.opt_hist.tolist(),
            "opt_mom": None if self.opt_mom is None else self.opt_mom.tolist(),
            "trace": list(self.trace),
            "meta": self.meta,
        }
        path.write_text(json.dumps(doc, sort_keys=True) + "\n")
        return path

    @classmethod
    def load(cls, path) -> "Posterior":
        doc = json.loads(Path(path).read_text())
        if doc.get("kind") != "posterior":
            raise ValueError(f"{path} is not a posterior checkpoint")
        hist, mom = doc.get("opt_hist"), doc.get("opt_mom")
        return cls(particles=np.array(doc["particles"]), norm=Normalization.from_dict(doc["norm"]),
                   prior=PriorConfig(**doc["prior"]), hidden=int(doc["hidden"]),
                   iterations=int(doc["iterations"]), seed=doc.get("seed"),
                   trace=list(doc.get("trace", [])),
                   opt_hist=None if hist is None else np.array(hist),
                   opt_mom=None if mom is None else np.array(mom), meta=doc.get("meta", {}))


def init_particles(rng: Rng, count: int, cfg: PriorConfig, hidden: int,
                   mode: str = "centred") -> np.ndarray:
    """Initial particle matrix (one independent stream per particle)."""
    if mode not in INITS:
        raise ValueError(f"init must be one of {INITS}")
    L = Layout(hidden)
    X = np.empty((count, L.dim))
    for i in range(count):
        r = rng.child("particle", i)
        X[i, :L.n_theta] = surrogate.init_params(r, "prior_sample", hidden,
                                                 cfg.sigma_w, cfg.sigma_b).flatten()
        if mode == "prior":
            X[i, L.lam] = softplus_inv(_draw_positive_t(r, cfg, 3))
            X[i, L.n_theta + 3:] = np.log(cfg.noise_scale * np.tan(0.5 * np.pi * r.uniform(size=4)))
        else:
            X[i, L.lam] = softplus_inv(max(cfg.mu, 1e-3))
            X[i, L.n_theta + 3:] = math.log(cfg.noise_scale)
    return X


def _draw_positive_t(r: Rng, cfg: PriorConfig, n: int) -> np.ndarray:
    out = []
    while len(out) < n:
        v = cfg.mu + cfg.t_scale * r.standard_t(cfg.t_df)
        if v > 1e-6:
            out.append(v)
    return np.array(out)


def warm_start_from(checkpoint: Posterior, target_norm: Normalization, hidden: int | None = None) -> np.ndarray:
    """Copy particles and re-express them in ``target_norm`` coordinates.

    Physical-unit predictions of every particle are unchanged.
    """
    if hidden is not None and hidden != checkpoint.hidden:
        raise ArchitectureError(f"checkpoint hidden={checkpoint.hidden}, target hidden={hidden}")
    H = checkpoint.hidden
    L = Layout(H)
    src, dst = checkpoint.norm, target_norm
    X = checkpoint.particles.copy()
    W1 = X[:, :2 * H].reshape(-1, H, 2)
    b1 = X[:, 2 * H:3 * H]
    W2 = X[:, 3 * H:5 * H].reshape(-1, 2, H)
    b2 = X[:, 5 * H:5 * H + 2]
    # inputs: tau_src = (s_dst * tau_dst + c_dst - c_src) / s_src
    for col, name in ((0, "t"), (1, "P_m")):
        a = dst.scale[name] / src.scale[name]
        c = (dst.shift[name] - src.shift[name]) / src.scale[name]
        b1 += W1[:, :, col] * c
        W1[:, :, col] *= a
    # outputs: y_dst = (s_src * y_src + c_src - c_dst) / s_dst
    for row, name in ((0, "delta"), (1, "domega")):
        a = src.scale[name] / dst.scale[name]
        c = (src.shift[name] - dst.shift[name]) / dst.scale[name]
        W2[:, row, :] *= a
        b2[:, row] = b2[:, row] * a + c
        X[:, L.n_theta + 3 + row] += math.log(a)
    X[:, :2 * H] = W1.reshape(-1, 2 * H)
    X[:, 2 * H:3 * H] = b1
    X[:, 3 * H:5 * H] = W2.reshape(-1, 2 * H)
    X[:, 5 * H:5 * H + 2] = b2
    return X


def svgd_fit(data: Dataset, colloc_count: int = 0, cfg: PriorConfig = PriorConfig(),
             particles: int = 30, iters: int = 2000, rng: Rng | None = None,
             warm_start: Posterior | None = None, hidden: int = surrogate.DEFAULT_HIDDEN,
             settings: SvgdSettings = SvgdSettings(), callback: Callable | None = None) -> Posterior:
    """Fit the Bayesian PINN posterior to ``data`` with SVGD."""
    if iters < 0:
        raise ValueError("iters must be >= 0")
    rng = Rng(0) if rng is None else rng
    prob = make_problem(data, colloc_count)
    state = OptState()
    start_iter = 0
    if warm_start is not None:
        if warm_start.hidden != hidden:
            raise ArchitectureError(f"checkpoint hidden={warm_start.hidden}, requested {hidden}")
        if warm_start.norm == data.norm and warm_start.opt_hist is not None:
            X0 = warm_start.particles.copy()
            state = OptState(warm_start.opt_hist.copy(),
                             None if warm_start.opt_mom is None else warm_start.opt_mom.copy(),
                             warm_start.iterations)
            start_iter = warm_start.iterations
        else:
            X0 = warm_start_from(warm_start, data.norm, hidden)
    else:
        if particles < 2:
            raise ValueError("SVGD needs at least two particles")
        X0 = init_particles(rng, particles, cfg, hidden, settings.init)

    def target(X):
        return log_joint_batch(X, prob, cfg, hidden)

    X, state, trace = svgd(X0, target, iters, settings, state, callback, settings.rates(hidden))
    return Posterior(particles=X, norm=data.norm, prior=cfg, hidden=hidden,
                     iterations=start_iter + iters, seed=rng.seed, trace=trace,
                     opt_hist=state.hist, opt_mom=state.mom,
                     meta={"n_colloc": prob.n_colloc, "n_data": prob.n_data,
                           "settings": asdict(settings)})


# ----------------------------------------------------------------------------
# summaries
# ----------------------------------------------------------------------------


def summarize(post: Posterior) -> dict:
    """``{name: (mean, 2*std)}`` of m, d, B across particles (physical units)."""
    if post.size < 2:
        raise ValueError("need at least two particles")
    lam = post.lam
    mean = lam.mean(axis=0)
    two_sigma = 2.0 * lam.std(axis=0, ddof=1)
    return {n: (float(mean[i]), float(two_sigma[i])) for i, n in enumerate(LAMBDA_NAMES)}


@dataclass(frozen=True)
class UncertaintyReport:
    """Per-time predictive moments in normalised units, shape (N, 2)."""

    times: np.ndarray
    mean: np.ndarray
    aleatoric: np.ndarray
    epistemic: np.ndarray
    total: np.ndarray
    norm: Normalization

    def physical_mean(self) -> np.ndarray:
        return np.column_stack([self.norm.decode("delta", self.mean[:, 0]),
                                self.norm.decode("domega", self.mean[:, 1])])

    def physical_total_std(self) -> np.ndarray:
        sc = np.array([self.norm.scale["delta"], self.norm.scale["domega"]])
        return np.sqrt(self.total) * sc


def predict(post: Posterior, times, P_m) -> UncertaintyReport:
    times = np.asarray(times, dtype=float)
    P = np.broadcast_to(np.asarray(P_m, dtype=float), times.shape)
    y, _ = kernels.predict(post.particles, post.hidden, post.norm.encode("t", times),
                           post.norm.encode("P_m", P))
    # centred on the first particle: identical networks give exactly zero spread
    dev = y - y[0]
    mean = y[0] + dev.mean(axis=0)
    epistemic = dev.var(axis=0)
    aleatoric = np.broadcast_to((post.sigma_x ** 2).mean(axis=0), mean.shape).copy()
    total = aleatoric + epistemic
    return UncertaintyReport(times, mean, aleatoric, epistemic, total, post.norm)


def with_particles(post: Posterior, X: np.ndarray) -> Posterior:
    return replace(post, particles=np.asarray(X, dtype=float))
