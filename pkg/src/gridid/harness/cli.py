"""Command-line entry point: ``gridid <command> ...``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from ..bpinn import LAMBDA_NAMES, PriorConfig
from ..diffcore import Rng
from ..gridsim import (CHANNEL_MODES, DYNAMICS, GRIDS, PM_READINGS, Dataset, ScenarioError,
                       build_scenario, sample_dataset, simulate)
from . import experiments as ex
from . import plots
from .config import METHODS, ConfigError, ExperimentConfig, ResultRecord
from .metrics import dataset_mape, reconstruct
from .results import fresh_path, write_manifest, write_records, write_rows

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _ints(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def _names(text: str) -> list[str]:
    return [v.strip() for v in text.split(",") if v.strip()]


def _add_experiment_flags(p, seed_required=True):
    p.add_argument("--seed", type=int, required=seed_required)
    p.add_argument("--n-z", type=int, default=100)
    p.add_argument("--n-c", type=int, default=0)
    p.add_argument("--iterations", type=int, default=2000)
    p.add_argument("--particles", type=int, default=30)
    p.add_argument("--mu", type=float, default=1.0)
    p.add_argument("--kappa", type=float, default=25.0)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--sigma-w", type=float, default=1.0)
    p.add_argument("--sigma-b", type=float, default=1.0)
    p.add_argument("--T", type=float, default=5.0)
    p.add_argument("--P-m", type=float, default=-0.1)
    p.add_argument("--reading", choices=PM_READINGS, default="absolute")
    p.add_argument("--channel", choices=CHANNEL_MODES, default="G1")
    p.add_argument("--noise-sigma", type=float, default=0.0)
    p.add_argument("--sindy-nu", type=float, default=0.0)
    p.add_argument("--mape-floor", type=float, default=1e-3)
    p.add_argument("--out", type=Path, required=True, help="output directory")


def _config(a, **override) -> ExperimentConfig:
    prior = PriorConfig(sigma_w=a.sigma_w, sigma_b=a.sigma_b, mu=a.mu, kappa=a.kappa,
                        alpha=a.alpha, beta=a.beta)
    base = dict(grid=getattr(a, "grid", "smib"), dynamics=getattr(a, "dynamics", "fast"),
                seed=a.seed, method=getattr(a, "method", "bpinn"), n_z=a.n_z, n_c=a.n_c,
                iterations=a.iterations, particles=a.particles, prior=prior,
                transfer=getattr(a, "transfer", None), output=str(a.out), T=a.T, P_m=a.P_m,
                reading=a.reading, channel=a.channel, noise_sigma=a.noise_sigma,
                sindy_nu=a.sindy_nu, mape_floor=a.mape_floor)
    base.update(override)
    return ExperimentConfig(**base)


def _report_failures(records: list[ResultRecord]) -> int:
    bad = [r for r in records if r.status != "ok"]
    for r in bad:
        c = r.config
        print(f"cell failed: grid={c.grid} dynamics={c.dynamics} method={c.method} seed={c.seed} "
              f"n_z={c.n_z} n_c={c.n_c} mu={c.prior.mu} kappa={c.prior.kappa}: {r.error}",
              file=sys.stderr)
    return EXIT_NUMERIC if bad else EXIT_OK


def _finish(name: str, records, out: Path, figure=None, extra=None) -> int:
    csv_path = write_records(records, out / f"{name}.csv")
    outputs = [csv_path]
    if figure is not None:
        outputs.append(figure(records, out / f"{name}.svg"))
    write_manifest(out / f"{name}.manifest.json", name, records, extra, outputs)
    print(csv_path)
    return _report_failures(records)


# ----------------------------------------------------------------------------
# commands
# ----------------------------------------------------------------------------


def cmd_simulate(a) -> int:
    model = build_scenario(a.grid, a.dynamics, ex.scenario_rng(a.seed))
    traj = simulate(model, None, a.P_m, a.T, reading=a.reading)
    data = sample_dataset(traj, a.n_z / a.T, a.T, a.noise_sigma, Rng(a.seed).child("data"),
                          a.channel)
    data.meta.update({"grid": a.grid, "dynamics": a.dynamics})
    csv_path, _ = data.save(fresh_path(a.out / f"{a.grid}-{a.dynamics}-{a.seed}.csv"))
    print(csv_path)
    return EXIT_OK


def cmd_fit(a) -> int:
    data = Dataset.load(a.dataset)
    cfg = _config(a, grid=data.meta.get("grid", "smib"),
                  dynamics=data.meta.get("dynamics", "fast"), n_z=data.n)
    record = ResultRecord(cfg)
    fit = ex.fit_dataset(cfg, data)
    ex.score_fit(cfg, fit, data, record)
    ckpt = None
    if hasattr(fit.model, "save"):
        ckpt = fit.model.save(a.out / f"{Path(a.dataset).stem}-{a.method}.checkpoint.json")
    return _finish(f"fit-{Path(a.dataset).stem}-{a.method}", [record], a.out,
                   extra={"checkpoint": None if ckpt is None else str(ckpt)})


def cmd_compare(a) -> int:
    base = _config(a, grid=a.grids[0], dynamics=a.dynamics[0], method=a.methods[0])
    records = ex.run_comparison(a.grids, a.dynamics, a.methods, a.seeds, base, a.workers)
    return _finish("compare", records, a.out, plots.comparison_svg)


def cmd_prior_sweep(a) -> int:
    records = ex.run_prior_sweep(a.mus, a.kappas, _config(a), a.workers)
    return _finish("prior-sweep", records, a.out, plots.prior_heatmap_svg)


def cmd_sample_sweep(a) -> int:
    records = ex.run_sample_sweep(a.n_zs, a.multipliers, _config(a), a.workers)
    return _finish("sample-sweep", records, a.out, plots.sample_sweep_svg)


def cmd_transfer(a) -> int:
    target = _config(a)
    grid = sorted(set(range(0, a.iterations + 1, a.every)) | {a.iterations})
    res = ex.run_transfer((a.source_grid, a.source_dynamics), a.pretrain, target, grid)
    rows = []
    for name, curve in (("scratch", res.scratch), ("warm", res.warm)):
        for i, it in enumerate(curve.iterations):
            rows.append({"curve": name, "iteration": it,
                         "mape_delta": curve.mape_delta[i], "mape_domega": curve.mape_domega[i],
                         "band_delta_lo": curve.band_delta[i][0],
                         "band_delta_hi": curve.band_delta[i][1],
                         "band_domega_lo": curve.band_domega[i][0],
                         "band_domega_hi": curve.band_domega[i][1]})
    summary = {"target_scratch": res.target_scratch, "target_warm": res.target_warm,
               "ratio": res.ratio, "channel": res.channel}
    rows.append({"curve": "summary", **summary})
    csv_path = write_rows(rows, a.out / "transfer.csv")
    svg = plots.transfer_svg(res, a.out / "transfer.svg")
    write_manifest(a.out / "transfer.manifest.json", "transfer", None,
                   {"config": res.config, "summary": summary}, [csv_path, svg])
    print(csv_path)
    return EXIT_OK


def cmd_reconstruct(a) -> int:
    data = Dataset.load(a.dataset)
    lam = np.array([a.m, a.d, a.B])
    rec = reconstruct(lam, data)
    rows = [{"t": t, "delta": x, "domega": w} for t, x, w in zip(rec.t, rec.delta, rec.domega)]
    path = write_rows(rows, a.out / f"{Path(a.dataset).stem}-reconstruction.csv")
    m = dataset_mape(data, rec, a.mape_floor)
    write_manifest(path.with_suffix(".manifest.json"), "reconstruct", None,
                   {"lambda": dict(zip(LAMBDA_NAMES, lam.tolist())), "mape": m,
                    "settles": rec.settles, "dataset": str(a.dataset)}, [path])
    print(path)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gridid", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate a scenario and write a dataset")
    p.add_argument("--grid", choices=GRIDS, required=True)
    p.add_argument("--dynamics", choices=DYNAMICS, required=True)
    _add_experiment_flags(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="fit one method to a dataset file")
    p.add_argument("--dataset", type=Path, required=True)
    p.add_argument("--method", choices=METHODS, required=True)
    p.add_argument("--transfer", default=None, help="posterior checkpoint for a warm start")
    _add_experiment_flags(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("compare", help="method comparison campaign")
    p.add_argument("--grids", type=_names, default=list(GRIDS))
    p.add_argument("--dynamics", type=_names, default=list(DYNAMICS))
    p.add_argument("--methods", type=_names, default=list(METHODS))
    p.add_argument("--seeds", type=_ints, required=True)
    p.add_argument("--workers", type=int, default=1)
    _add_experiment_flags(p, seed_required=False)
    p.set_defaults(func=cmd_compare, seed=0)

    p = sub.add_parser("prior-sweep", help="MAPE over a (mu, kappa) grid")
    p.add_argument("--grid", choices=GRIDS, default="smib")
    p.add_argument("--dynamics", choices=DYNAMICS, default="fast")
    p.add_argument("--mus", type=_floats, required=True)
    p.add_argument("--kappas", type=_floats, required=True)
    p.add_argument("--workers", type=int, default=1)
    _add_experiment_flags(p)
    p.set_defaults(func=cmd_prior_sweep)

    p = sub.add_parser("sample-sweep", help="MAPE over data and collocation counts")
    p.add_argument("--grid", choices=GRIDS, default="ieee118")
    p.add_argument("--dynamics", choices=DYNAMICS, default="fast")
    p.add_argument("--n-zs", type=_ints, required=True)
    p.add_argument("--multipliers", type=_floats, default=[0.0, 1.0, 2.0, 4.0])
    p.add_argument("--method", choices=METHODS, default="bpinn")
    p.add_argument("--workers", type=int, default=1)
    _add_experiment_flags(p)
    p.set_defaults(func=cmd_sample_sweep)

    p = sub.add_parser("transfer", help="warm-started versus from-scratch training curves")
    p.add_argument("--source-grid", choices=GRIDS, default="smib")
    p.add_argument("--source-dynamics", choices=DYNAMICS, default="slow")
    p.add_argument("--pretrain", type=int, default=1000)
    p.add_argument("--grid", choices=GRIDS, default="ieee118")
    p.add_argument("--dynamics", choices=DYNAMICS, default="fast")
    p.add_argument("--every", type=int, default=100)
    _add_experiment_flags(p)
    p.set_defaults(func=cmd_transfer)

    p = sub.add_parser("reconstruct", help="swing-model trajectory for given parameters")
    p.add_argument("--dataset", type=Path, required=True)
    p.add_argument("--m", type=float, required=True)
    p.add_argument("--d", type=float, required=True)
    p.add_argument("--B", type=float, required=True)
    p.add_argument("--mape-floor", type=float, default=1e-3)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_reconstruct)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        a = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    for name in ("grids", "dynamics", "methods"):
        allowed = {"grids": GRIDS, "dynamics": DYNAMICS, "methods": METHODS}[name]
        vals = getattr(a, name, None)
        if isinstance(vals, list) and any(v not in allowed for v in vals):
            print(f"error: --{name} must be drawn from {allowed}", file=sys.stderr)
            return EXIT_CONFIG
    try:
        return a.func(a)
    except (ConfigError, ScenarioError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ex.NUMERICAL_ERRORS as exc:
        cell = {k: getattr(a, k) for k in ("grid", "dynamics", "method", "seed", "dataset")
                if hasattr(a, k)}
        print(f"numerical failure in {a.command} {cell}: {type(exc).__name__}: {exc}",
              file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
