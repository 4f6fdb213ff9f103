import csv
import json
import math
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, strategies as st

from gridid import bpinn, sindy
from gridid.bpinn import PriorConfig
from gridid.harness import (ConfigError, ExperimentConfig, ResultRecord, dataset_mape,
                            datasets_for, iterations_to_target, mape, reconstruct,
                            reconstruct_batch, run_cell, run_comparison, run_prior_sweep,
                            run_sample_sweep, run_transfer)
from gridid.harness import cli
from gridid.harness import experiments as ex
from gridid.harness.results import fresh_path, read_rows, write_records

from conftest import SMIB_TRUE

QUICK = dict(iterations=40, particles=4)


# ---------------------------------------------------------------------------
# mape


def test_mape_examples():
    x = np.array([1.0, 2.0])
    assert mape(x, x) == 0.0
    assert mape(x, np.array([1.1, 1.8]), None) == pytest.approx(10.0, rel=1e-12)
    assert mape(x, np.array([1.1, 1.8])) == pytest.approx(10.0, rel=1e-12)


def test_mape_floor_guards_zero_crossing():
    t = np.linspace(0, 2 * math.pi, 41)
    x = np.sin(t)
    x_hat = np.sin(t + 0.01)
    with np.errstate(divide="ignore"):
        raw = mape(x, x_hat, None)
    floored = mape(x, x_hat, 1e-3)
    assert not math.isfinite(raw) or raw > 1e6
    assert math.isfinite(floored) and floored < 100


def test_mape_errors():
    with pytest.raises(ValueError):
        mape(np.array([]), np.array([]))
    with pytest.raises(ValueError):
        mape(np.ones(2), np.ones(3))


@given(st.lists(st.floats(1.0, 10.0), min_size=1, max_size=20), st.floats(0.5, 100.0),
       st.floats(-0.5, 0.5))
def test_mape_scale_invariance(xs, c, e):
    x = np.array(xs)
    x_hat = x * (1 + e)
    assert mape(c * x, c * x_hat) == pytest.approx(mape(x, x_hat), rel=1e-9, abs=1e-12)


# ---------------------------------------------------------------------------
# reconstruction


def test_reconstruct_true_parameters_reproduces_data(smib_data):
    rec = reconstruct(SMIB_TRUE["fast"], smib_data)
    assert np.abs(rec.delta - smib_data.delta).max() < 1e-6
    assert np.abs(rec.domega - smib_data.domega).max() < 1e-6
    assert rec.settles


def test_reconstruct_flags_missing_equilibrium(smib_data):
    rec = reconstruct((0.2, 0.15, 0.05), smib_data)
    assert not rec.settles and np.all(np.isfinite(rec.delta))
    assert rec.delta[-1] < -math.pi / 2 and np.all(np.diff(rec.delta[-20:]) < 0)  # slipping


def test_reconstruct_rejects_non_positive(smib_data):
    with pytest.raises(ValueError):
        reconstruct((0.2, -0.1, 0.2), smib_data)


def test_batch_reconstruction_matches_single(smib_data):
    lams = np.array([[0.2, 0.15, 0.2], [0.5, 0.3, 0.1], [1.0, 0.05, 0.4]])
    out = reconstruct_batch(lams, smib_data)
    for i, lam in enumerate(lams):
        assert np.array_equal(out[i], reconstruct(lam, smib_data).states())


def test_sindy_reconstruction_error_is_tiny(smib_data):
    fit = sindy.sindy_fit(smib_data)
    m = dataset_mape(smib_data, reconstruct(fit.lam, smib_data))
    assert m["delta"] < 0.5 and m["domega"] < 0.5


# ---------------------------------------------------------------------------
# config and records


def test_config_roundtrip():
    cfg = ExperimentConfig(grid="bus3", dynamics="slow", seed=7, method="pinn", n_z=50, n_c=100,
                           prior=PriorConfig(mu=2.0, kappa=10.0))
    assert ExperimentConfig.from_dict(cfg.to_dict()) == cfg
    flat = {k: ("" if v is None else str(v)) for k, v in cfg.flat().items()}
    assert ExperimentConfig.from_flat(flat) == cfg


@pytest.mark.parametrize("bad", [dict(grid="ieee9"), dict(dynamics="x"), dict(method="gp"),
                                 dict(n_z=1), dict(particles=1), dict(T=0.0),
                                 dict(transfer="/nonexistent/ckpt.json"), dict(seed=-1)])
def test_config_validation(bad):
    with pytest.raises(ConfigError):
        ExperimentConfig(**bad)
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"grid": "smib", "colour": "red"})


def test_record_row_is_self_describing():
    cfg = ExperimentConfig(method="sindy")
    rec = run_cell(cfg)
    row = rec.row()
    assert "wall_time" not in row and rec.wall_time > 0
    again = run_cell(ExperimentConfig.from_flat({k: "" if v is None else str(v)
                                                 for k, v in row.items()}))
    assert again.row() == row


def test_bayesian_cell_is_bit_reproducible():
    cfg = ExperimentConfig(**QUICK)
    a, b = run_cell(cfg), run_cell(cfg)
    assert a.row() == b.row() and a.uq_identity is True and a.lam_2sigma is not None


def test_failed_cell_is_captured(monkeypatch):
    def boom(cfg, data, callback=None):
        raise FloatingPointError("synthetic")
    monkeypatch.setattr(ex, "fit_dataset", boom)
    rec = run_cell(ExperimentConfig())
    assert rec.status == "error" and "synthetic" in rec.error


# ---------------------------------------------------------------------------
# campaigns


def test_full_campaign_cardinality(monkeypatch):
    monkeypatch.setattr(ex, "run_cell", lambda cfg: ResultRecord(cfg))
    recs = run_comparison(("smib", "bus3", "cigre14", "ieee118"), ("fast", "medium", "slow"),
                          ("bpinn", "pinn", "sindy"), [0])
    assert len(recs) == 36
    assert len({(r.config.grid, r.config.dynamics, r.config.method) for r in recs}) == 36


def test_one_failing_cell_does_not_abort(monkeypatch):
    real = ex.run_cell

    def flaky(cfg):
        if cfg.method == "pinn":
            rec = ResultRecord(cfg, status="error", error="x")
            return rec
        return real(cfg)
    monkeypatch.setattr(ex, "run_cell", flaky)
    recs = run_comparison(["smib"], ["fast"], ["sindy", "pinn"], [0])
    assert [r.status for r in recs] == ["ok", "error"]


def test_degenerate_prior_sweep_equals_comparison_cell():
    base = ExperimentConfig(**QUICK)
    sweep = run_prior_sweep([1.0], [25.0], base)
    plain = run_comparison(["smib"], ["fast"], ["bpinn"], [0], base)
    assert len(sweep) == 1 and sweep[0].row() == plain[0].row()


def test_prior_sweep_cardinality():
    recs = run_prior_sweep([0.5, 1.0, 4.0], [5.0, 25.0, 50.0], ExperimentConfig(**QUICK))
    assert len(recs) == 9
    assert all(r.status == "ok" and math.isfinite(r.mape_delta) and math.isfinite(r.mape_domega)
               for r in recs)
    with pytest.raises(ValueError):
        run_prior_sweep([], [1.0], ExperimentConfig())


def test_sample_sweep_baseline_matches_comparison():
    base = ExperimentConfig(**QUICK)
    sweep = run_sample_sweep([100], [0.0], base)
    plain = run_comparison(["smib"], ["fast"], ["bpinn"], [0], base)
    assert sweep[0].mape_delta == plain[0].mape_delta
    assert sweep[0].lam == plain[0].lam


def test_sample_sweep_reuses_one_trajectory():
    ex._trajectory.cache_clear()
    run_sample_sweep([10, 20], [0.0, 1.0], ExperimentConfig(method="sindy"))
    assert ex._trajectory.cache_info().misses == 1


@pytest.mark.slow
def test_sindy_wins_on_smib():
    recs = run_comparison(["smib"], ["fast"], ["sindy", "bpinn"], [0])
    assert recs[0].mape_delta <= recs[1].mape_delta


# ---------------------------------------------------------------------------
# transfer


def test_iterations_to_target():
    its = [0, 100, 200, 300]
    assert iterations_to_target(its, [50.0, 12.0, 10.5, 10.0], 10.0) == 200
    assert iterations_to_target(its, [5.0, 12.0, 10.5, 10.0], 10.0) == 0
    assert iterations_to_target(its, [50.0, np.nan, 30.0, 20.0], 10.0) is None


def test_self_transfer_reaches_target_immediately():
    cfg = ExperimentConfig(iterations=400, particles=10)
    train, _ = datasets_for(cfg)
    pre = ex.fit_dataset(cfg, train).model
    res = run_transfer(("smib", "fast"), 400, cfg, [0, 200, 400], pretrained=pre)
    assert res.target_warm == 0
    assert res.warm.mape_delta[0] == pytest.approx(res.scratch.mape_delta[-1], rel=1e-12)


@pytest.mark.slow
def test_scratch_curve_is_flat_after_convergence(transfer_118):
    c = transfer_118.scratch
    v = dict(zip(c.iterations, c.series("delta")))
    assert abs(v[2000] - v[1500]) <= 0.05 * v[1500]


# ---------------------------------------------------------------------------
# persistence and CLI


def test_fresh_path_never_overwrites(tmp_path):
    p = tmp_path / "a.csv"
    assert fresh_path(p) == p
    p.write_text("x")
    assert fresh_path(p) == tmp_path / "a.1.csv"
    (tmp_path / "a.1.csv").write_text("y")
    assert fresh_path(p) == tmp_path / "a.2.csv"


def test_records_csv_roundtrip(tmp_path):
    rec = run_cell(ExperimentConfig(method="sindy"))
    path = write_records([rec], tmp_path / "r.csv")
    rows = read_rows(path)
    assert float(rows[0]["m"]) == rec.lam[0]
    assert float(rows[0]["mape_delta"]) == rec.mape_delta


def run_cli(*args):
    return subprocess.run([sys.executable, "-m", "gridid.harness.cli", *args],
                          capture_output=True, text=True)


def test_cli_exit_codes(tmp_path):
    ok = run_cli("compare", "--grids", "smib", "--dynamics", "fast", "--methods", "sindy",
                 "--seeds", "0", "--out", str(tmp_path))
    assert ok.returncode == 0, ok.stderr
    assert (tmp_path / "compare.csv").exists() and (tmp_path / "compare.svg").exists()
    manifest = json.loads((tmp_path / "compare.manifest.json").read_text())
    assert manifest["records"][0]["wall_time"] > 0

    assert run_cli("compare", "--grids", "ieee9", "--seeds", "0", "--out", str(tmp_path)).returncode == 2
    assert run_cli("fit", "--dataset", str(tmp_path / "missing.csv"), "--method", "sindy",
                   "--seed", "0", "--out", str(tmp_path)).returncode == 2
    assert run_cli("simulate", "--grid", "smib", "--dynamics", "fast",
                   "--out", str(tmp_path)).returncode == 2  # --seed is mandatory

    sim = run_cli("simulate", "--grid", "smib", "--dynamics", "fast", "--seed", "0",
                  "--out", str(tmp_path))
    assert sim.returncode == 0
    path = tmp_path / "smib-fast-0.csv"
    rows = list(csv.reader(path.open()))
    flipped = tmp_path / "flipped.csv"
    with flipped.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(rows[0])
        for r in rows[1:]:
            w.writerow([r[0], repr(-float(r[1])), r[2], r[3]])
    bad = run_cli("fit", "--dataset", str(flipped), "--method", "sindy", "--seed", "0",
                  "--out", str(tmp_path))
    assert bad.returncode == 3
    assert "sindy" in bad.stderr and "NonPhysicalFit" in bad.stderr


def test_cli_outputs_are_append_only(tmp_path):
    args = ("compare", "--grids", "smib", "--dynamics", "fast", "--methods", "sindy",
            "--seeds", "0", "--out", str(tmp_path))
    assert run_cli(*args).returncode == 0
    first = (tmp_path / "compare.csv").read_bytes()
    assert run_cli(*args).returncode == 0
    assert (tmp_path / "compare.csv").read_bytes() == first
    assert (tmp_path / "compare.1.csv").exists()


def test_cli_reconstruct(tmp_path):
    assert run_cli("simulate", "--grid", "smib", "--dynamics", "slow", "--seed", "1",
                   "--out", str(tmp_path)).returncode == 0
    r = run_cli("reconstruct", "--dataset", str(tmp_path / "smib-slow-1.csv"), "--m", "0.8",
                "--d", "0.15", "--B", "0.2", "--out", str(tmp_path))
    assert r.returncode == 0, r.stderr
    man = json.loads((tmp_path / "smib-slow-1-reconstruction.manifest.json").read_text())
    assert man["mape"]["delta"] < 1e-3 and man["settles"]


def test_cli_parser_covers_every_command():
    ap = cli.build_parser()
    sub = next(a for a in ap._actions if a.dest == "command")
    assert set(sub.choices) == {"simulate", "fit", "compare", "prior-sweep", "sample-sweep",
                                "transfer", "reconstruct"}
