"""Regenerate the bundled grid descriptions in ``src/gridid/gridsim/grids``.

IEEE 118-bus data comes from the MATPOWER-format case shipped with
``pypower`` (pass its directory with ``--pypower``); the CIGRE MV feeder is
transcribed below from the public benchmark definition.  The output is
plain JSON and is committed, so the package never imports either source.

Modelling reductions applied here (the simulator is lossless and
quasi-stationary):

* branch susceptance ``B = 1/x``; resistance, line charging and transformer
  taps are dropped, parallel circuits stay separate branches;
* loads become constant admittances ``g - j q`` at 1 p.u. voltage, scaled by
  ``load_scale`` so that the external grid (the only source with a non-zero
  set point) can carry them;
* the external grid is a stiff 1 p.u. source behind a reactance at the
  original slack or infeed bus.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

OUT = Path(__file__).resolve().parents[1] / "src" / "gridid" / "gridsim" / "grids"

INVERTER = {"J_c": 0.02, "d_c": 0.1, "R_f": 0.01, "L_f": 0.05, "C_f": 0.05, "R_T": 0.01,
            "L_T": 0.05, "Mf_if": 1.0, "omega_ref": 1.0, "P_set": 0.0, "deadband": 2e-4}
INERTIA = {"fast": 0.2, "medium": 0.4, "slow": 0.8}
DAMPING = 0.15
T_GOV = 2.0


def scenarios(sync, governor=True, **extra):
    """Same synchronous set for every dynamics setting unless ``sync`` is a dict."""
    out = {}
    for k, m in INERTIA.items():
        names = sync[k] if isinstance(sync, dict) else sync
        out[k] = {"synchronous": list(names), "m": m, "d": DAMPING, "T_gov": T_GOV,
                  "governor": governor, **extra}
    return out


def smib():
    B = 0.2
    return {
        "name": "smib",
        "description": "single machine behind reactance 1/B against an infinite bus",
        "base_mva": 100.0,
        "n_bus": 1,
        "bus_names": ["infinite bus"],
        "branches": [],
        "loads": [],
        "external_grid": {"bus": 0, "x": 0.0, "v": 1.0},
        "sites": [{"name": "G1", "bus": 0}],
        "generator": {"x_d": 1.0 / B, "E": 1.0},
        "inverter": INVERTER,
        "jitter": None,
        "scenarios": scenarios(["G1"], governor=False, B=B),
    }


def bus3():
    B, load = 10.0, 0.2
    return {
        "name": "bus3",
        "description": "meshed three-bus system: one machine, two synchronverters, "
                       "weak tie to an external grid",
        "base_mva": 100.0,
        "n_bus": 3,
        "bus_names": ["bus 1", "bus 2", "bus 3"],
        "branches": [[0, 1, B], [1, 2, B], [0, 2, B]],
        "loads": [[1, load, 0.0], [2, load, 0.0]],
        "external_grid": {"bus": 2, "x": 1.0, "v": 1.0},
        "sites": [{"name": "G1", "bus": 0}, {"name": "IBR2", "bus": 1}, {"name": "IBR3", "bus": 2}],
        "generator": {"x_d": 0.3, "E": 1.0},
        "inverter": INVERTER,
        "jitter": None,
        "scenarios": scenarios(["G1"]),
    }


# CIGRE MV benchmark, 20 kV feeders behind two 110/20 kV transformers.
# Bus 0 is the 110 kV infeed; buses 1..14 are the MV buses.  The three
# normally open switches (6-7, 11-4, 14-8) are left open.
CIGRE_CABLE_X = 0.716   # ohm/km
CIGRE_OHL_X = 0.366
CIGRE_LINES = [  # (from, to, km, kind)
    (1, 2, 2.82, "c"), (2, 3, 4.42, "c"), (3, 4, 0.61, "c"), (4, 5, 0.56, "c"),
    (5, 6, 1.54, "c"), (7, 8, 1.67, "c"), (8, 9, 0.32, "c"), (9, 10, 0.77, "c"),
    (10, 11, 0.33, "c"), (3, 8, 1.30, "c"), (12, 13, 4.89, "o"), (13, 14, 2.99, "o"),
]
CIGRE_TRAFOS = [(0, 1), (0, 12)]   # 25 MVA, vk 12 %
CIGRE_LOADS = [  # (bus, MW, power factor)
    (1, 15.3, 0.98), (3, 0.285, 0.97), (4, 0.445, 0.97), (5, 0.750, 0.97), (6, 0.565, 0.97),
    (8, 0.605, 0.97), (10, 0.490, 0.97), (11, 0.340, 0.97), (12, 15.3, 0.98), (14, 0.215, 0.97),
    (1, 5.1, 0.95), (3, 0.265, 0.85), (7, 0.090, 0.85), (9, 0.675, 0.85), (10, 0.080, 0.85),
    (12, 5.28, 0.95), (13, 0.04, 0.85), (14, 0.390, 0.85),
]
CIGRE_SC_MVA = 5000.0


def cigre14(base_mva=25.0, load_scale=0.1):
    z_base = 20.0 ** 2 / base_mva
    branches = []
    for f, t, km, kind in CIGRE_LINES:
        x = km * (CIGRE_CABLE_X if kind == "c" else CIGRE_OHL_X) / z_base
        branches.append([f, t, 1.0 / x])
    x_tr = 0.12 * base_mva / 25.0
    for f, t in CIGRE_TRAFOS:
        branches.append([f, t, 1.0 / x_tr])
    loads = []
    for bus, mw, pf in CIGRE_LOADS:
        p = load_scale * mw / base_mva
        q = p * (1.0 / pf ** 2 - 1.0) ** 0.5
        loads.append([bus, p, -q])
    # CHP unit (synchronous) at bus 9, converter-interfaced DER elsewhere
    sites = [{"name": "G1", "bus": 9}] + [
        {"name": f"IBR{b}", "bus": b} for b in (3, 4, 5, 6, 7, 8, 10, 11)]
    return {
        "name": "cigre14",
        "description": "CIGRE MV benchmark (14 MV buses plus the 110 kV infeed), "
                       "one CHP machine and eight synchronverter-controlled DER units",
        "base_mva": base_mva,
        "load_scale": load_scale,
        "n_bus": 15,
        "bus_names": ["bus 0 (110 kV)"] + [f"bus {k}" for k in range(1, 15)],
        "branches": branches,
        "loads": loads,
        "external_grid": {"bus": 0, "x": base_mva / CIGRE_SC_MVA, "v": 1.0},
        "sites": sites,
        "generator": {"x_d": 0.3, "E": 1.0},
        "inverter": INVERTER,
        "jitter": {"fields": ["J_c", "d_c"], "relative": 0.2},
        "scenarios": scenarios(["G1"]),
    }


def ieee118(pypower_dir, load_scale=0.1, slack_x=0.05):
    sys.path.insert(0, str(pypower_dir))
    from pypower.case118 import case118

    case = case118()
    base = float(case["baseMVA"])
    bus_ids = [int(b) for b in case["bus"][:, 0]]
    pos = {b: i for i, b in enumerate(bus_ids)}
    branches = [[pos[int(r[0])], pos[int(r[1])], 1.0 / float(r[3])]
                for r in case["branch"] if r[10] > 0]
    loads = []
    for r in case["bus"]:
        p, q = float(r[2]), float(r[3])
        if p or q:
            loads.append([pos[int(r[0])], load_scale * p / base, -load_scale * q / base])
    slack = [int(r[0]) for r in case["bus"] if int(r[1]) == 3][0]
    gen_buses = [int(g) for g in case["gen"][:, 0]]
    sites = [{"name": f"G{k + 1}", "bus": pos[b]} for k, b in enumerate(gen_buses)]
    sync = {"fast": ["G1"], "medium": ["G1", "G7", "G5"],
            "slow": ["G1", "G7", "G5", "G17", "G14", "G18"]}
    return {
        "name": "ieee118",
        "description": "IEEE 118-bus system; machines at the listed generator sites, "
                       "synchronverters at every other generator site",
        "base_mva": base,
        "load_scale": load_scale,
        "n_bus": len(bus_ids),
        "bus_names": [f"bus {b}" for b in bus_ids],
        "branches": branches,
        "loads": loads,
        "external_grid": {"bus": pos[slack], "x": slack_x, "v": 1.0},
        "sites": [s for s in sites if s["bus"] != pos[slack]],
        "generator": {"x_d": 0.3, "E": 1.0},
        "inverter": INVERTER,
        "jitter": None,
        "scenarios": scenarios(sync),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--pypower", type=Path, required=True,
                    help="directory containing the pypower package")
    ap.add_argument("--out", type=Path, default=OUT)
    args = ap.parse_args(argv)
    args.out.mkdir(parents=True, exist_ok=True)
    for grid in (smib(), bus3(), cigre14(), ieee118(args.pypower)):
        path = args.out / f"{grid['name']}.json"
        path.write_text(json.dumps(grid, indent=1) + "\n")
        print(f"wrote {path} ({grid['n_bus']} buses, {len(grid['branches'])} branches)")


if __name__ == "__main__":
    main()
