"""Experiment configuration and result records."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from ..bpinn import PriorConfig
from ..gridsim import CHANNEL_MODES, DYNAMICS, GRIDS, PM_READINGS

METHODS = ("bpinn", "pinn", "sindy")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    grid: str = "smib"
    dynamics: str = "fast"
    seed: int = 0
    method: str = "bpinn"
    n_z: int = 100
    n_c: int = 0
    iterations: int = 2000
    particles: int = 30
    prior: PriorConfig = field(default_factory=PriorConfig)
    transfer: str | None = None       # posterior checkpoint to warm-start from
    output: str | None = None
    T: float = 5.0
    P_m: float = -0.1
    reading: str = "absolute"
    channel: str = "G1"
    noise_sigma: float = 0.0
    sindy_nu: float = 0.0
    mape_floor: float = 1e-3
    eval_n: int = 100                 # samples of the scoring grid over [0, T)

    def __post_init__(self):
        if isinstance(self.prior, dict):
            object.__setattr__(self, "prior", PriorConfig(**self.prior))
        self.validate()

    def validate(self):
        if self.grid not in GRIDS:
            raise ConfigError(f"unknown grid {self.grid!r}; expected one of {GRIDS}")
        if self.dynamics not in DYNAMICS:
            raise ConfigError(f"unknown dynamics {self.dynamics!r}; expected one of {DYNAMICS}")
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if self.reading not in PM_READINGS:
            raise ConfigError(f"reading must be one of {PM_READINGS}")
        if self.channel not in CHANNEL_MODES:
            raise ConfigError(f"channel must be one of {CHANNEL_MODES}")
        if not 0 <= int(self.seed) < 2**63:
            raise ConfigError("seed must be a non-negative integer")
        if self.n_z < 2 or self.n_c < 0 or self.iterations < 0 or self.eval_n < 2:
            raise ConfigError("need n_z >= 2, n_c >= 0, iterations >= 0, eval_n >= 2")
        if self.method == "bpinn" and self.particles < 2:
            raise ConfigError("bpinn needs at least two particles")
        if not self.T > 0 or self.noise_sigma < 0 or self.sindy_nu < 0 or self.mape_floor < 0:
            raise ConfigError("T must be positive; noise, nu and floor non-negative")
        if self.transfer is not None and not Path(self.transfer).is_file():
            raise ConfigError(f"transfer checkpoint {self.transfer} does not exist")

    @property
    def rate(self) -> float:
        return self.n_z / self.T

    def replace(self, **changes) -> "ExperimentConfig":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["prior"] = asdict(self.prior)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        return cls(**d)

    def flat(self) -> dict:
        """One level deep, prior fields prefixed, for CSV rows."""
        d = self.to_dict()
        prior = d.pop("prior")
        d.update({f"prior_{k}": v for k, v in prior.items()})
        return d

    @classmethod
    def from_flat(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        prior = {k[6:]: float(d.pop(k)) for k in list(d) if k.startswith("prior_")}
        kinds = {f.name: f.type for f in fields(cls)}
        out = {}
        for k, v in d.items():
            if k not in kinds:
                continue
            if v in ("", None):
                out[k] = None
            elif k in ("seed", "n_z", "n_c", "iterations", "particles", "eval_n"):
                out[k] = int(v)
            elif k in ("T", "P_m", "noise_sigma", "sindy_nu", "mape_floor"):
                out[k] = float(v)
            else:
                out[k] = v
        return cls(prior=PriorConfig(**prior), **out)


@dataclass
class ResultRecord:
    config: ExperimentConfig
    status: str = "ok"                 # ok | error
    lam: tuple | None = None           # (m, d, B)
    lam_2sigma: tuple | None = None    # Bayesian only
    mape_delta: float | None = None
    mape_domega: float | None = None
    settles: bool | None = None
    iterations: int = 0
    wall_time: float = 0.0
    uq_identity: bool | None = None    # total == aleatoric + epistemic on the scoring grid
    error: str = ""
    extra: dict = field(default_factory=dict)

    @property
    def mape(self) -> float | None:
        """Mean of the two channel MAPEs."""
        if self.mape_delta is None or self.mape_domega is None:
            return None
        return 0.5 * (self.mape_delta + self.mape_domega)

    def row(self) -> dict:
        """CSV row; wall time is left out so reruns are byte-identical."""
        lam = self.lam or (None, None, None)
        two = self.lam_2sigma or (None, None, None)
        out = {"status": self.status}
        for k, v in zip(("m", "d", "B"), lam):
            out[k] = v
        for k, v in zip(("m_2sigma", "d_2sigma", "B_2sigma"), two):
            out[k] = v
        out.update({"mape_delta": self.mape_delta, "mape_domega": self.mape_domega,
                    "settles": self.settles, "iterations_used": self.iterations,
                    "uq_identity": self.uq_identity, "error": self.error})
        out.update(self.extra)
        out.update(self.config.flat())
        return out

    def to_dict(self) -> dict:
        return {"config": self.config.to_dict(), "status": self.status,
                "lam": None if self.lam is None else list(self.lam),
                "lam_2sigma": None if self.lam_2sigma is None else list(self.lam_2sigma),
                "mape_delta": self.mape_delta, "mape_domega": self.mape_domega,
                "settles": self.settles, "iterations": self.iterations,
                "wall_time": self.wall_time, "uq_identity": self.uq_identity,
                "error": self.error, "extra": self.extra}
