"""Exit criteria, one test per criterion, each reporting a PASS/FAIL line."""
import math
import subprocess
import sys
import time

import numpy as np
import pytest

from gridid import bpinn, pinn, sindy
from gridid.bpinn import Layout, PriorConfig, softplus_inv
from gridid.gridsim import build_scenario, sample_dataset, simulate
from gridid.harness import (ExperimentConfig, datasets_for, run_comparison, run_prior_sweep,
                            run_sample_sweep)

from conftest import SMIB_TRUE, report

pytestmark = [pytest.mark.acceptance, pytest.mark.slow]

L = Layout()
_cache = {}


def once(key, fn):
    if key not in _cache:
        _cache[key] = fn()
    return _cache[key]


def rel_err(a, b):
    return np.abs(np.asarray(a) - np.asarray(b)) / np.abs(np.asarray(b))


def batch_fd(f, x, h=1e-5):
    """Central differences of a batched scalar function, every coordinate in one call."""
    E = np.eye(len(x)) * h
    v = f(np.vstack([x + E, x - E]))
    return (v[:len(x)] - v[len(x):]) / (2 * h)


def pinn_loss_rows(X, prob, s):
    rm = pinn._loss_terms(X, prob, L.hidden, s, want_grad=False)[0]
    return s.data_weight * rm[:, :2].sum(axis=1) + s.residual_weight * rm[:, 2:].sum(axis=1)


# ---------------------------------------------------------------------------


def test_a1_gradients():
    t0 = time.perf_counter()
    r = np.random.default_rng(1)
    cfg = PriorConfig()
    s = pinn.PinnSettings()
    worst_b = worst_p = 0.0
    for grid in ("smib", "bus3", "cigre14"):
        train, _ = datasets_for(ExperimentConfig(grid=grid, n_z=50))
        prob_b = bpinn.make_problem(train, 20)
        prob_p = bpinn.make_problem(train, 20, residual_units="normalized")
        for _ in range(20):
            x = r.normal(0, 0.5, L.dim)
            x[L.lam] = softplus_inv(r.uniform(0.1, 2.0, 3))
            x[L.n_theta + 3:] = r.uniform(-1.5, 0.5, 4)
            _, G = bpinn.log_joint_batch(x[None], prob_b, cfg, L.hidden)
            fd = batch_fd(lambda X: bpinn.log_joint_batch(X, prob_b, cfg, L.hidden)[0], x)
            worst_b = max(worst_b, np.abs(G[0] - fd).max() / np.abs(fd).max())
            k = L.n_theta + 3
            rm, G = pinn._loss_terms(x[None], prob_p, L.hidden, s)
            fd = batch_fd(lambda X: pinn_loss_rows(X, prob_p, s), x)
            worst_p = max(worst_p, np.abs(G[0, :k] - fd[:k]).max() / np.abs(fd[:k]).max())
    dt = time.perf_counter() - t0
    ok = worst_b < 1e-5 and worst_p < 1e-5 and dt < 60
    report("A1", ok, f"max rel FD error bpinn {worst_b:.2e} pinn {worst_p:.2e}; {dt:.0f} s")
    assert ok


def test_a2_smib_exactness():
    model = build_scenario("smib", "fast")
    traj = simulate(model, None, -0.1, 5.0)
    data = sample_dataset(traj, 20.0, 5.0)
    true = np.array(SMIB_TRUE["fast"])
    fd = rel_err(sindy.sindy_fit(data).lam, true).max()
    m, d, B = true
    rate = (data.P_m - d * data.domega - B * np.sin(data.delta)) / m
    ana = rel_err(sindy.sindy_fit(data, derivatives=rate).lam, true).max()
    ok = fd < 1e-3 and ana < 1e-10
    report("A2", ok, f"SINDy rel error {fd:.2e} (FD), {ana:.2e} (analytic)")
    assert ok


def smib_width_records():
    recs = []
    for dyn in ("fast", "slow"):
        recs += run_comparison(["smib"], [dyn], ["bpinn"], [0, 1, 2])
    return recs


def test_a3_smib_bpinn():
    rec = once("a5", smib_width_records)[0]
    assert rec.config.dynamics == "fast" and rec.config.seed == 0
    err = rel_err(rec.lam, SMIB_TRUE["fast"]).max()
    ok = rec.status == "ok" and err < 0.05 and rec.mape_delta < 5.0
    report("A3", ok, f"lam {np.round(rec.lam, 4).tolist()} max rel err {err:.3f}, "
           f"MAPE_delta {rec.mape_delta:.2f}%, fit {rec.wall_time:.0f} s")
    assert ok


def test_a4_method_ordering():
    t0 = time.perf_counter()
    recs = once("a4", lambda: run_comparison(["bus3", "cigre14"], ["fast"],
                                             ["bpinn", "pinn", "sindy"], [0, 1, 2]))
    ok, parts = True, []
    for grid in ("bus3", "cigre14"):
        med = {m: float(np.median([r.mape_delta for r in recs
                                   if r.config.grid == grid and r.config.method == m]))
               for m in ("bpinn", "pinn", "sindy")}
        ratio = med["sindy"] / med["bpinn"]
        good = med["bpinn"] < med["pinn"] < med["sindy"] and ratio >= 5
        ok &= good
        parts.append(f"{grid}: bpinn {med['bpinn']:.2f} pinn {med['pinn']:.2f} "
                     f"sindy {med['sindy']:.2f} ratio {ratio:.2f}")
    dt = time.perf_counter() - t0
    ok &= all(r.status == "ok" for r in recs)
    report("A4", ok, "; ".join(parts) + f" (median MAPE_delta %); {dt:.0f} s")
    assert ok


def test_a5_posterior_width():
    recs = once("a5", smib_width_records)
    fast = [r.lam_2sigma[0] for r in recs if r.config.dynamics == "fast"]
    slow = [r.lam_2sigma[0] for r in recs if r.config.dynamics == "slow"]
    ok = all(f < s for f, s in zip(fast, slow))
    report("A5", ok, "2sigma(m) fast " + ", ".join(f"{v:.4f}" for v in fast) + " vs slow "
           + ", ".join(f"{v:.4f}" for v in slow))
    assert ok


def test_a6_collocation_trend():
    t0 = time.perf_counter()
    base = ExperimentConfig(grid="ieee118", dynamics="fast")
    cells = {}
    for n_z, mult in ((10, 0), (10, 2), (5, 0), (5, 4), (50, 0)):
        r = run_sample_sweep([n_z], [mult], base)[0]
        cells[(n_z, mult)] = r.mape_delta
    first = cells[(10, 2)] <= 0.5 * cells[(10, 0)]
    second = cells[(5, 4)] <= 2 * cells[(50, 0)]
    dt = time.perf_counter() - t0
    ok = first and second
    report("A6", ok, "MAPE_delta % " + ", ".join(f"N_z={a} N_c={a * b}: {v:.2f}"
                                                 for (a, b), v in cells.items())
           + f"; halving {'met' if first else 'missed'}, within-2x {'met' if second else 'missed'};"
           f" {dt:.0f} s")
    assert ok


def test_a7_transfer(transfer_118):
    res = transfer_118
    ok = (res.target_warm is not None and res.target_scratch is not None
          and res.ratio <= 0.5)
    report("A7", ok, f"iterations to target: warm {res.target_warm}, scratch {res.target_scratch},"
           f" ratio {res.ratio:.2f}; final MAPE_delta scratch {res.scratch.mape_delta[-1]:.2f}%,"
           f" warm {res.warm.mape_delta[-1]:.2f}%")
    assert ok


def test_a8_uncertainty_identity():
    recs = run_comparison(["smib", "bus3", "cigre14", "ieee118"], ["fast", "medium", "slow"],
                          ["bpinn"], [0])
    recs += [r for r in _cache.get("a4", []) + _cache.get("a5", []) if r.config.method == "bpinn"]
    bad = [f"{r.config.grid}-{r.config.dynamics}-{r.config.seed}" for r in recs
           if r.status != "ok" or r.uq_identity is not True]
    ok = not bad
    report("A8", ok, f"{len(recs) - len(bad)}/{len(recs)} Bayesian cells satisfy the variance identity"
           + (f"; failing {bad}" if bad else ""))
    assert ok


def test_a9_prior_sensitivity():
    recs = run_prior_sweep([1.0, 50.0], [25.0], ExperimentConfig())
    a, b = recs[0].mape_delta, recs[1].mape_delta
    ok = a <= b
    report("A9", ok, f"MAPE_delta mu=1 {a:.2f}% vs mu=50 {b:.2f}%")
    assert ok


def cli(*args):
    p = subprocess.run([sys.executable, "-m", "gridid.harness.cli", *map(str, args)],
                       capture_output=True, text=True)
    assert p.returncode == 0, p.stderr
    return p


def test_a10_determinism(tmp_path):
    fast = ("--iterations", 60, "--particles", 5)
    o = tmp_path
    commands = {
        "smib-fast-0.csv": ("simulate", "--grid", "smib", "--dynamics", "fast", "--seed", 0),
        "fit-smib-fast-0-bpinn.csv": ("fit", "--dataset", o / "smib-fast-0.csv", "--method",
                                      "bpinn", "--seed", 0, *fast),
        "compare.csv": ("compare", "--grids", "smib,bus3", "--dynamics", "fast", "--methods",
                        "bpinn,pinn,sindy", "--seeds", 0, *fast),
        "prior-sweep.csv": ("prior-sweep", "--mus", "1,50", "--kappas", 25, "--seed", 0, *fast),
        "sample-sweep.csv": ("sample-sweep", "--n-zs", "10,20", "--multipliers", "0,2", "--seed", 0,
                             *fast),
        "transfer.csv": ("transfer", "--source-grid", "smib", "--source-dynamics", "slow",
                         "--pretrain", 30, "--grid", "smib", "--dynamics", "fast", "--every", 20,
                         "--seed", 0, *fast),
        "smib-fast-0-reconstruction.csv": ("reconstruct", "--dataset", o / "smib-fast-0.csv",
                                           "--m", 0.2, "--d", 0.15, "--B", 0.2),
    }
    same = []
    for name, args in commands.items():
        cli(*args, "--out", o)
        cli(*args, "--out", o)
        a, b = (o / name).read_bytes(), (o / name.replace(".csv", ".1.csv")).read_bytes()
        same.append((name.split(".")[0], a == b))
    ok = all(v for _, v in same)
    report("A10", ok, "byte-identical reruns: " + ", ".join(f"{k} {'yes' if v else 'NO'}"
                                                           for k, v in same))
    assert ok
