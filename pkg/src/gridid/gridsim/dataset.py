"""Measurement datasets and their normalisation record."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

CHANNELS = ("t", "P_m", "delta", "domega")


@dataclass(frozen=True)
class Normalization:
    """Per-channel affine map ``x_norm = (x - shift) / scale``."""

    shift: dict
    scale: dict

    @classmethod
    def fit(cls, columns: dict) -> "Normalization":
        """Min-max map of every column onto [-1, 1].

        A constant column (``P_m`` after the step) cannot be min-max scaled;
        it is divided by its own magnitude instead, so it maps to +-1.
        """
        shift, scale = {}, {}
        for name, values in columns.items():
            v = np.asarray(values, dtype=float)
            lo, hi = float(v.min()), float(v.max())
            span = 0.5 * (hi - lo)
            if span <= 1e-12 * max(1.0, abs(hi), abs(lo)):
                shift[name] = 0.0
                scale[name] = abs(hi) if abs(hi) > 0 else 1.0
            else:
                shift[name] = 0.5 * (hi + lo)
                scale[name] = span
        return cls(shift, scale)

    def encode(self, name: str, x):
        return (np.asarray(x, dtype=float) - self.shift[name]) / self.scale[name]

    def decode(self, name: str, y):
        return np.asarray(y, dtype=float) * self.scale[name] + self.shift[name]

    def to_dict(self) -> dict:
        return {"shift": dict(self.shift), "scale": dict(self.scale)}

    @classmethod
    def from_dict(cls, d: dict) -> "Normalization":
        return cls({k: float(v) for k, v in d["shift"].items()},
                   {k: float(v) for k, v in d["scale"].items()})


@dataclass(frozen=True)
class Dataset:
    """Sampled ``(t, P_m, delta, domega)`` of the monitored generator.

    Values are stored in physical units; ``norm`` maps them to the
    normalised space the estimators work in.  ``x0`` is the recorded initial
    state ``(delta, domega)`` used for reconstruction.
    """

    t: np.ndarray
    P_m: np.ndarray
    delta: np.ndarray
    domega: np.ndarray
    norm: Normalization
    noise_sigma: float = 0.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.t)
        if n < 2:
            raise ValueError("a dataset needs at least two samples")
        for name in ("P_m", "delta", "domega"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"column {name} has wrong length")
        if np.any(np.diff(self.t) <= 0):
            raise ValueError("sample times must be strictly increasing")

    @property
    def n(self) -> int:
        return len(self.t)

    @property
    def horizon(self) -> float:
        """Length of the window the samples cover (t in [0, T])."""
        return float(self.meta.get("T", self.t[-1]))

    @property
    def x0(self) -> np.ndarray:
        return np.array(self.meta.get("x0", [self.delta[0], self.domega[0]]), dtype=float)

    @property
    def step_P_m(self) -> float:
        return float(self.P_m[-1])

    def states(self) -> np.ndarray:
        return np.column_stack([self.delta, self.domega])

    def normalized_states(self) -> np.ndarray:
        return np.column_stack([self.norm.encode("delta", self.delta),
                                self.norm.encode("domega", self.domega)])

    def subsample(self, every: int) -> "Dataset":
        """Keep every ``every``-th sample; normalisation is refitted."""
        idx = np.arange(0, self.n, every)
        cols = {"t": self.t[idx], "P_m": self.P_m[idx],
                "delta": self.delta[idx], "domega": self.domega[idx]}
        meta = dict(self.meta)
        if meta.get("rate"):
            meta["rate"] = meta["rate"] / every
        return Dataset(norm=Normalization.fit(cols), noise_sigma=self.noise_sigma,
                       meta=meta, **cols)

    # -- files ---------------------------------------------------------------
    def save(self, path) -> tuple[Path, Path]:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CHANNELS)
            for row in zip(self.t, self.P_m, self.delta, self.domega):
                w.writerow([repr(float(v)) for v in row])
        side = path.with_suffix(".meta.json")
        side.write_text(json.dumps({"norm": self.norm.to_dict(),
                                    "noise_sigma": self.noise_sigma,
                                    **_jsonable(self.meta)}, indent=2, sort_keys=True) + "\n")
        return path, side

    @classmethod
    def load(cls, path) -> "Dataset":
        path = Path(path)
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if tuple(rows[0]) != CHANNELS:
            raise ValueError(f"{path}: expected header {','.join(CHANNELS)}")
        data = np.array(rows[1:], dtype=float)
        cols = dict(zip(CHANNELS, data.T))
        side = path.with_suffix(".meta.json")
        meta = json.loads(side.read_text()) if side.exists() else {}
        norm = Normalization.from_dict(meta.pop("norm")) if "norm" in meta else Normalization.fit(cols)
        noise = float(meta.pop("noise_sigma", 0.0))
        return cls(norm=norm, noise_sigma=noise, meta=meta, **cols)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    return obj
