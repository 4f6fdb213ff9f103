"""Device models, equilibrium search and time-domain simulation.

Synchronous generators follow a swing equation with an optional first-order
governor; synchronverters imitate a swing equation in their controller and
drive an LCL filter modelled as dynamic phasors in the nominal frame.  The
network is algebraic.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from ..diffcore import rk4_integrate
from .network import Network, ReducedNetwork, reduce

OMEGA_B = 2.0 * math.pi * 50.0


class SteadyStateError(RuntimeError):
    def __init__(self, residual: float, iterations: int):
        super().__init__(f"equilibrium search stopped after {iterations} iterations, "
                         f"residual {residual:.3e}")
        self.residual = residual


@dataclass(frozen=True)
class SyncGenParams:
    m: float
    d: float
    T_gov: float = 2.0
    governor: bool = True
    x_d: float = 0.0   # reactance between EMF and terminal bus
    E: float = 1.0     # EMF magnitude
    P_m0: float = 0.0  # pre-step mechanical power

    def __post_init__(self):
        if not (self.m > 0 and self.d > 0 and self.T_gov > 0):
            raise ValueError("m, d and T_gov must be positive")
        if self.x_d < 0 or not self.E > 0:
            raise ValueError("x_d must be >= 0 and E > 0")


@dataclass(frozen=True)
class SynchronverterParams:
    J_c: float = 0.02
    d_c: float = 0.1
    R_f: float = 0.01
    L_f: float = 0.05
    C_f: float = 0.05
    R_T: float = 0.01
    L_T: float = 0.05
    Mf_if: float = 1.0
    omega_ref: float = 1.0
    P_set: float = 0.0
    deadband: float = 2e-4

    def __post_init__(self):
        if not all(v > 0 for v in (self.J_c, self.d_c, self.L_f, self.C_f, self.L_T)):
            raise ValueError("J_c, d_c, L_f, C_f and L_T must be positive")
        if self.R_f < 0 or self.R_T < 0 or self.deadband < 0:
            raise ValueError("resistances and deadband must be non-negative")


@dataclass(frozen=True)
class Device:
    name: str
    bus: int
    params: object


@dataclass(frozen=True)
class SystemModel:
    network: Network
    generators: tuple          # Device[SyncGenParams]; the first one is perturbed
    inverters: tuple = ()      # Device[SynchronverterParams]
    label: str = ""
    dt: float | None = None    # integration step; None picks one from the spectrum
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.generators:
            raise ValueError("a system model needs at least one synchronous generator")

    @property
    def n_gen(self) -> int:
        return len(self.generators)

    @property
    def n_inv(self) -> int:
        return len(self.inverters)

    def layout(self) -> "Layout":
        return Layout.of(self)

    def with_inverter_params(self, **changes) -> "SystemModel":
        invs = tuple(replace(d, params=replace(d.params, **changes)) for d in self.inverters)
        return replace(self, inverters=invs)

    def reduced(self) -> ReducedNetwork:
        return reduce(self.network, [g.bus for g in self.generators],
                      [g.params.x_d for g in self.generators], [i.bus for i in self.inverters])


@dataclass(frozen=True)
class Layout:
    n_gen: int
    n_inv: int
    governed: np.ndarray     # indices of generators with a governor

    @classmethod
    def of(cls, model: SystemModel) -> "Layout":
        gov = np.array([i for i, g in enumerate(model.generators) if g.params.governor], dtype=int)
        return cls(model.n_gen, model.n_inv, gov)

    @property
    def n_gov(self) -> int:
        return len(self.governed)

    def _off(self):
        g, q, i = self.n_gen, self.n_gov, self.n_inv
        o = {"delta": 0, "domega": g, "P_gov": 2 * g}
        base = 2 * g + q
        for k, name in enumerate(("delta_c", "domega_c", "I_rl_re", "I_rl_im",
                                  "V_f_re", "V_f_im", "I_g_re", "I_g_im")):
            o[name] = base + k * i
        o["end"] = base + 8 * i
        return o

    @property
    def size(self) -> int:
        return self._off()["end"]

    def slices(self) -> dict:
        o = self._off()
        g, q, i = self.n_gen, self.n_gov, self.n_inv
        out = {"delta": slice(0, g), "domega": slice(g, 2 * g), "P_gov": slice(2 * g, 2 * g + q)}
        for name in ("delta_c", "domega_c", "I_rl_re", "I_rl_im", "V_f_re", "V_f_im",
                     "I_g_re", "I_g_im"):
            out[name] = slice(o[name], o[name] + i)
        return out


class Dynamics:
    """Vectorised right-hand side of one :class:`SystemModel`."""

    def __init__(self, model: SystemModel):
        self.model = model
        self.L = model.layout()
        self.s = self.L.slices()
        self.net = model.reduced()
        gp = [g.params for g in model.generators]
        self.m = np.array([p.m for p in gp])
        self.d = np.array([p.d for p in gp])
        self.E = np.array([p.E for p in gp])
        self.T_gov = np.array([p.T_gov for p in gp])[self.L.governed]
        self.P_m0 = np.array([p.P_m0 for p in gp])
        ext = model.network.external_grid
        self.E_ext = np.array([ext.get("v", 1.0)], dtype=complex) if ext else np.zeros(0, complex)
        ip = [d.params for d in model.inverters]
        col = lambda k: np.array([getattr(p, k) for p in ip], dtype=float)
        self.J, self.dc, self.db = col("J_c"), col("d_c"), col("deadband")
        self.Rf, self.Lf, self.Cf = col("R_f"), col("L_f"), col("C_f")
        self.RT, self.LT = col("R_T"), col("L_T")
        self.Mf, self.wref, self.Pset = col("Mf_if"), col("omega_ref"), col("P_set")

    def unpack(self, x):
        s = self.s
        I_rl = x[s["I_rl_re"]] + 1j * x[s["I_rl_im"]]
        V_f = x[s["V_f_re"]] + 1j * x[s["V_f_im"]]
        I_g = x[s["I_g_re"]] + 1j * x[s["I_g_im"]]
        return I_rl, V_f, I_g

    def sources(self, x):
        s = self.s
        E_g = self.E * np.exp(1j * x[s["delta"]])
        return np.concatenate([E_g, self.E_ext])

    def inverter_emf(self, x):
        s = self.s
        w = self.wref + x[s["domega_c"]]
        return self.Mf * w * np.exp(1j * x[s["delta_c"]]), w

    def electrical(self, x):
        """Generator electrical power, inverter bus voltages, source currents."""
        _, _, I_g = self.unpack(x)
        E_K = self.sources(x)
        I_K, V_I = self.net.solve(E_K, I_g)
        n = self.L.n_gen
        P_e = (E_K[:n] * np.conj(I_K[:n])).real
        return P_e, V_I, I_K, E_K

    def rhs(self, x, P_m):
        s = self.s
        out = np.empty_like(x)
        P_e, V_I, _, _ = self.electrical(x)
        dw = x[s["domega"]]
        P_mech = np.array(P_m, dtype=float)
        if self.L.n_gov:
            P_gov = x[s["P_gov"]]
            P_mech[self.L.governed] += P_gov
            out[s["P_gov"]] = -(dw[self.L.governed] + P_gov) / self.T_gov
        out[s["delta"]] = dw
        out[s["domega"]] = (P_mech - self.d * dw - P_e) / self.m
        if self.L.n_inv:
            I_rl, V_f, I_g = self.unpack(x)
            E_c, w = self.inverter_emf(x)
            dwc = x[s["domega_c"]]
            T_e = (E_c * np.conj(I_rl)).real / w
            damp = np.where(np.abs(dwc) < self.db, 0.0, self.dc)
            out[s["delta_c"]] = dwc
            out[s["domega_c"]] = (self.Pset - T_e - damp * dwc) / self.J
            dI_rl = OMEGA_B / self.Lf * (E_c - V_f - (self.Rf + 1j * self.Lf) * I_rl)
            dV_f = OMEGA_B / self.Cf * (I_rl - I_g - 1j * self.Cf * V_f)
            dI_g = OMEGA_B / self.LT * (V_f - V_I - (self.RT + 1j * self.LT) * I_g)
            out[s["I_rl_re"]], out[s["I_rl_im"]] = dI_rl.real, dI_rl.imag
            out[s["V_f_re"]], out[s["V_f_im"]] = dV_f.real, dV_f.imag
            out[s["I_g_re"]], out[s["I_g_im"]] = dI_g.real, dI_g.imag
        return out

    def power_balance(self, x) -> float:
        """Source plus inverter injections minus load consumption (lossless lines)."""
        _, _, I_g = self.unpack(x)
        E_K = self.sources(x)
        I_K = self.net.M_KK @ E_K + self.net.M_KI @ I_g
        V = self.net.bus_voltages(E_K, I_g)
        inj = (E_K * np.conj(I_K)).real.sum()
        if self.L.n_inv:
            inj += (V[self.net.inverter_bus] * np.conj(I_g)).real.sum()
        return float(inj - self.net.load_power(V))


def _filter_equilibrium(dyn: "Dynamics", delta, delta_c):
    """Filter phasors at nominal frequency for given machine angles (linear)."""
    E_K = np.concatenate([dyn.E * np.exp(1j * delta), dyn.E_ext])
    E_c = dyn.Mf * dyn.wref * np.exp(1j * delta_c)
    Zf = dyn.Rf + 1j * dyn.Lf
    Zt = dyn.RT + 1j * dyn.LT
    Y1 = 1.0 / Zf + 1j * dyn.Cf
    M = dyn.net.C_II + np.diag(Zt + 1.0 / Y1)
    I_g = np.linalg.solve(M, E_c / (Zf * Y1) - dyn.net.A_I @ E_K)
    V_f = (E_c / Zf - I_g) / Y1
    I_rl = (E_c - V_f) / Zf
    return I_rl, V_f, I_g


def _assemble(dyn: "Dynamics", delta, delta_c) -> np.ndarray:
    s = dyn.s
    x = np.zeros(dyn.L.size)
    x[s["delta"]] = delta
    if dyn.L.n_inv:
        x[s["delta_c"]] = delta_c
        I_rl, V_f, I_g = _filter_equilibrium(dyn, delta, delta_c)
        x[s["I_rl_re"]], x[s["I_rl_im"]] = I_rl.real, I_rl.imag
        x[s["V_f_re"]], x[s["V_f_im"]] = V_f.real, V_f.imag
        x[s["I_g_re"]], x[s["I_g_im"]] = I_g.real, I_g.imag
    return x


def steady_state(model: SystemModel, tol: float = 1e-9, max_iter: int = 200) -> np.ndarray:
    """Equilibrium at the pre-step mechanical powers.

    At rest all frequency deviations and governor outputs vanish and the
    filter phasors follow linearly from the machine angles, so a damped
    Newton iteration runs on the angles only; the assembled state is then
    checked against the full derivative rule.
    """
    dyn = Dynamics(model)
    ng, ni = dyn.L.n_gen, dyn.L.n_inv
    s = dyn.s

    def resid(theta):
        x = _assemble(dyn, theta[:ng], theta[ng:])
        f = dyn.rhs(x, dyn.P_m0)
        return np.concatenate([f[s["domega"]], f[s["domega_c"]]])

    theta = np.zeros(ng + ni)
    r = resid(theta)
    it = 0
    while np.abs(r).max() >= 0.1 * tol:
        if it == max_iter:
            raise SteadyStateError(float(np.abs(r).max()), it)
        it += 1
        J = _fd_jacobian(resid, theta, r, eps=1e-6)
        step = np.linalg.lstsq(J, -r, rcond=None)[0]
        merit = r @ r
        lam = 1.0
        while True:
            tn = theta + lam * step
            rn = resid(tn)
            if np.all(np.isfinite(rn)) and rn @ rn < merit:
                break
            lam *= 0.5
            if lam < 1e-10:
                raise SteadyStateError(float(np.abs(r).max()), it)
        theta, r = tn, rn
    x = _assemble(dyn, theta[:ng], theta[ng:])
    res = np.abs(dyn.rhs(x, dyn.P_m0)).max()
    if res >= tol:
        raise SteadyStateError(float(res), it)
    return x


def jacobian(model: SystemModel, x) -> np.ndarray:
    dyn = Dynamics(model)
    f = dyn.rhs(x, dyn.P_m0)
    return _fd_jacobian(lambda z: dyn.rhs(z, dyn.P_m0), np.asarray(x, dtype=float), f)


def auto_dt(model: SystemModel, x0, record_dt: float = 1e-3, margin: float = 2.5) -> float:
    """Largest ``record_dt / k`` keeping ``dt * spectral_radius <= margin``.

    RK4 is stable on the imaginary axis up to about 2.83; the filter modes
    sit close to it.
    """
    rho = float(np.abs(np.linalg.eigvals(jacobian(model, x0))).max())
    k = max(1, int(math.ceil(rho * record_dt / margin)))
    return record_dt / k


def _fd_jacobian(fun, x, f0, eps: float = 1e-7):
    n = len(x)
    J = np.empty((len(f0), n))
    for k in range(n):
        h = eps * max(1.0, abs(x[k]))
        xp = x.copy()
        xp[k] += h
        xm = x.copy()
        xm[k] -= h
        J[:, k] = (fun(xp) - fun(xm)) / (2 * h)
    return J


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    delta: np.ndarray        # (N, n_gen) rad
    domega: np.ndarray       # (N, n_gen)
    P_m: np.ndarray          # (N,) mechanical power of the perturbed generator
    delta0: np.ndarray       # pre-step generator angles
    gen_names: tuple
    gen_inertia: np.ndarray
    inv_domega: np.ndarray   # (N, n_inv)
    label: str = ""
    meta: dict = field(default_factory=dict)

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    @property
    def record_dt(self) -> float:
        return float(self.times[1] - self.times[0])

    @property
    def domega_pu(self) -> np.ndarray:
        """Frequency deviation relative to nominal (``domega`` is in rad/s)."""
        return self.domega / OMEGA_B


PM_READINGS = ("absolute", "step")


def simulate(model: SystemModel, x0=None, P_m: float = -0.1, T: float = 5.0,
             dt: float | None = None, record_dt: float = 1e-3, reading: str = "absolute",
             states: bool = False):
    """Integrate the model after changing the first generator's mechanical power.

    ``reading="absolute"``: ``P_m`` is the post-step mechanical power;
    ``reading="step"``: ``P_m`` is added to the pre-step value.
    Returns a :class:`Trajectory` (and the raw state history if ``states``).
    """
    if reading not in PM_READINGS:
        raise ValueError(f"reading must be one of {PM_READINGS}")
    if not T > 0:
        raise ValueError("T must be positive")
    dyn = Dynamics(model)
    x0 = steady_state(model) if x0 is None else np.asarray(x0, dtype=float)
    if dt is None:
        dt = model.dt if model.dt is not None else auto_dt(model, x0, record_dt)
    stride = int(round(record_dt / dt))
    if stride < 1 or abs(stride * dt - record_dt) > 1e-12:
        raise ValueError("record_dt must be an integer multiple of dt")
    P = dyn.P_m0.copy()
    P[0] = P_m if reading == "absolute" else P[0] + P_m
    times, X = rk4_integrate(lambda t, x: dyn.rhs(x, P), x0, 0.0, T, dt, stride=stride)
    s = dyn.s
    traj = Trajectory(
        times=times,
        delta=X[:, s["delta"]].copy(),
        domega=X[:, s["domega"]].copy(),
        P_m=np.full(len(times), P[0]),
        delta0=x0[s["delta"]].copy(),
        gen_names=tuple(g.name for g in model.generators),
        gen_inertia=dyn.m.copy(),
        inv_domega=X[:, s["domega_c"]].copy(),
        label=model.label,
        meta={"P_m": float(P[0]), "P_m0": float(dyn.P_m0[0]), "reading": reading,
              "dt": dt, "T": T, **model.meta},
    )
    return (traj, X) if states else traj
