"""Bundled grid descriptions and scenario construction."""
from __future__ import annotations

import json
from dataclasses import fields
from functools import lru_cache
from importlib import resources

from ..diffcore import Rng
from .model import Device, SyncGenParams, SynchronverterParams, SystemModel
from .network import Network

GRIDS = ("smib", "bus3", "cigre14", "ieee118")
DYNAMICS = ("fast", "medium", "slow")


class ScenarioError(ValueError):
    pass


@lru_cache(maxsize=None)
def _load_text(grid: str) -> str:
    return resources.files(__package__).joinpath("grids", f"{grid}.json").read_text()


def grid_description(grid: str) -> dict:
    """Parsed grid file (a fresh copy on every call)."""
    if grid not in GRIDS:
        raise ScenarioError(f"unknown grid {grid!r}; expected one of {GRIDS}")
    return json.loads(_load_text(grid))


def network_from(desc: dict) -> Network:
    return Network(
        n_bus=int(desc["n_bus"]),
        branches=tuple((int(f), int(t), float(B)) for f, t, B in desc["branches"]),
        loads=tuple((int(b), float(g), float(s)) for b, g, s in desc["loads"]),
        external_grid=desc.get("external_grid"),
        names=tuple(desc.get("bus_names", ())),
    )


def _inverter_params(base: dict, jitter: dict | None, rng: Rng) -> SynchronverterParams:
    known = {f.name for f in fields(SynchronverterParams)}
    p = {k: float(v) for k, v in base.items() if k in known}
    if jitter:
        r = float(jitter["relative"])
        for name in jitter["fields"]:
            p[name] *= 1.0 + rng.uniform(-r, r)
    return SynchronverterParams(**p)


def build_scenario(grid: str, dynamics: str, rng: Rng | None = None) -> SystemModel:
    """System model for one grid and dynamics setting.

    Sites listed as synchronous for the setting get a machine, every other
    site a synchronverter.  Where the grid file asks for it, inverter
    parameters are drawn uniformly around their defaults from ``rng``.
    """
    desc = grid_description(grid)
    if dynamics not in DYNAMICS:
        raise ScenarioError(f"unknown dynamics {dynamics!r}; expected one of {DYNAMICS}")
    sc = desc["scenarios"][dynamics]
    sync = list(sc["synchronous"])
    by_name = {s["name"]: int(s["bus"]) for s in desc["sites"]}
    missing = [n for n in sync if n not in by_name]
    if missing:
        raise ScenarioError(f"{grid}: synchronous sites {missing} are not in the grid file")
    gen = desc["generator"]
    gens = tuple(
        Device(name, by_name[name],
               SyncGenParams(m=sc["m"], d=sc["d"], T_gov=sc["T_gov"], governor=sc["governor"],
                             x_d=gen["x_d"], E=gen.get("E", 1.0)))
        for name in sync)
    jitter = desc.get("jitter")
    if jitter and rng is None:
        raise ScenarioError(f"{grid} draws inverter parameters and needs an rng")
    inv_rng = rng.child("inverters") if jitter else None
    invs = tuple(
        Device(s["name"], int(s["bus"]), _inverter_params(desc["inverter"], jitter, inv_rng))
        for s in desc["sites"] if s["name"] not in sync)
    meta = {"grid": grid, "dynamics": dynamics, "seed": None if rng is None else rng.seed}
    return SystemModel(network_from(desc), gens, invs, label=f"{grid}-{dynamics}", meta=meta)
