"""Campaign orchestration: scenario -> data -> fit -> reconstruction -> MAPE."""
from __future__ import annotations

import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from .. import bpinn, pinn, sindy
from ..bpinn import Posterior, PriorConfig
from ..diffcore import Rng
from ..gridsim import Dataset, build_scenario, grid_description, sample_dataset, simulate
from ..gridsim.model import SteadyStateError
from .config import ExperimentConfig, ResultRecord
from .metrics import dataset_mape, mape, reconstruct, reconstruct_batch

NUMERICAL_ERRORS = (FloatingPointError, np.linalg.LinAlgError, SteadyStateError,
                    sindy.NonPhysicalFit, OverflowError)


@dataclass
class FitOutput:
    lam: np.ndarray
    lam_2sigma: np.ndarray | None
    iterations: int
    model: object = None        # Posterior, PinnEstimate or SindyFit


# ----------------------------------------------------------------------------
# data
# ----------------------------------------------------------------------------


def scenario_rng(seed: int) -> Rng:
    return Rng(seed).child("scenario")


@lru_cache(maxsize=16)
def _trajectory(grid, dynamics, seed, P_m, reading, T):
    model = build_scenario(grid, dynamics, None if seed is None else scenario_rng(seed))
    return simulate(model, None, P_m, T, reading=reading)


def trajectory_for(cfg: ExperimentConfig):
    """Simulated trajectory for ``cfg``; the seed only matters for grids
    that draw parameters, so other grids share one simulation."""
    seeded = bool(grid_description(cfg.grid).get("jitter"))
    return _trajectory(cfg.grid, cfg.dynamics, int(cfg.seed) if seeded else None,
                       float(cfg.P_m), cfg.reading, float(cfg.T))


def datasets_for(cfg: ExperimentConfig, traj=None) -> tuple[Dataset, Dataset]:
    """Training data at ``n_z`` samples and the noise-free scoring grid."""
    traj = trajectory_for(cfg) if traj is None else traj
    rng = Rng(cfg.seed).child("data")
    train = sample_dataset(traj, cfg.rate, cfg.T, cfg.noise_sigma, rng, cfg.channel)
    score = sample_dataset(traj, cfg.eval_n / cfg.T, cfg.T, 0.0, None, cfg.channel)
    return train, score


# ----------------------------------------------------------------------------
# fitting and scoring
# ----------------------------------------------------------------------------


def fit_dataset(cfg: ExperimentConfig, data: Dataset, callback=None) -> FitOutput:
    rng = Rng(cfg.seed).child("fit", cfg.method)
    if cfg.method == "sindy":
        f = sindy.sindy_fit(data, cfg.sindy_nu)
        return FitOutput(f.lam, None, 0, f)
    if cfg.method == "pinn":
        est = pinn.pinn_fit(data, cfg.n_c, cfg.iterations, rng)
        return FitOutput(est.lam, None, est.iterations, est)
    warm = Posterior.load(cfg.transfer) if cfg.transfer else None
    post = bpinn.svgd_fit(data, cfg.n_c, cfg.prior, cfg.particles, cfg.iterations, rng,
                          warm_start=warm, callback=callback)
    s = bpinn.summarize(post)
    lam = np.array([s[n][0] for n in bpinn.LAMBDA_NAMES])
    two = np.array([s[n][1] for n in bpinn.LAMBDA_NAMES])
    return FitOutput(lam, two, post.iterations, post)


def uq_identity(post: Posterior, times, P_m) -> bool:
    """Total predictive variance equals aleatoric plus epistemic, all >= 0."""
    rep = bpinn.predict(post, times, P_m)
    ok = np.array_equal(rep.total, rep.aleatoric + rep.epistemic)
    return bool(ok and (rep.aleatoric >= 0).all() and (rep.epistemic >= 0).all()
                and (rep.total >= 0).all())


def score_fit(cfg: ExperimentConfig, fit: FitOutput, score: Dataset, record: ResultRecord):
    rec = reconstruct(fit.lam, score)
    m = dataset_mape(score, rec, cfg.mape_floor)
    record.lam = tuple(float(v) for v in fit.lam)
    record.lam_2sigma = None if fit.lam_2sigma is None else tuple(float(v) for v in fit.lam_2sigma)
    record.mape_delta, record.mape_domega = m["delta"], m["domega"]
    record.settles = rec.settles
    record.iterations = fit.iterations
    if isinstance(fit.model, Posterior):
        record.uq_identity = uq_identity(fit.model, score.t, score.P_m)


def run_cell(cfg: ExperimentConfig, checkpoint: str | Path | None = None) -> ResultRecord:
    """One campaign cell.  Failures are captured in the record."""
    record = ResultRecord(cfg)
    t0 = time.perf_counter()
    try:
        train, score = datasets_for(cfg)
        fit = fit_dataset(cfg, train)
        score_fit(cfg, fit, score, record)
        if checkpoint is not None and hasattr(fit.model, "save"):
            fit.model.save(checkpoint)
    except NUMERICAL_ERRORS as exc:
        record.status = "error"
        record.error = f"{type(exc).__name__}: {exc}"
    except Exception as exc:  # noqa: BLE001 - one cell never aborts a campaign
        record.status = "error"
        record.error = f"{type(exc).__name__}: {exc}"
        record.extra["traceback"] = traceback.format_exc(limit=3).replace("\n", " | ")
    record.wall_time = time.perf_counter() - t0
    return record


def run_cells(configs, workers: int = 1) -> list[ResultRecord]:
    """Run independent cells, serially or on a process pool; order is kept."""
    configs = list(configs)
    if workers <= 1 or len(configs) <= 1:
        return [run_cell(c) for c in configs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run_cell, configs))


# ----------------------------------------------------------------------------
# campaigns
# ----------------------------------------------------------------------------


def run_comparison(grids, dynamics, methods, seeds, base: ExperimentConfig = ExperimentConfig(),
                   workers: int = 1) -> list[ResultRecord]:
    cfgs = [base.replace(grid=g, dynamics=d, method=m, seed=s)
            for g in grids for d in dynamics for s in seeds for m in methods]
    return run_cells(cfgs, workers)


def run_prior_sweep(mus, kappas, base: ExperimentConfig, workers: int = 1) -> list[ResultRecord]:
    mus, kappas = list(mus), list(kappas)
    if not mus or not kappas:
        raise ValueError("prior grids must be non-empty")
    cfgs = []
    for mu in mus:
        for kappa in kappas:
            prior = PriorConfig(**{**base.prior.__dict__, "mu": float(mu), "kappa": float(kappa)})
            cfgs.append(base.replace(method="bpinn", prior=prior))
    return run_cells(cfgs, workers)


def run_sample_sweep(n_zs, multipliers, base: ExperimentConfig, workers: int = 1) -> list[ResultRecord]:
    """MAPE per (N_z, N_c = multiplier * N_z); one trajectory, scored on the
    same grid for every cell."""
    cfgs = [base.replace(n_z=int(n), n_c=int(round(k * n))) for n in n_zs for k in multipliers]
    records = run_cells(cfgs, workers)
    for r, k in zip(records, [k for _ in n_zs for k in multipliers]):
        r.extra["n_c_multiplier"] = float(k)
    return records


@dataclass
class Curve:
    iterations: list
    mape_delta: list
    mape_domega: list
    band_delta: list = field(default_factory=list)    # (lo, hi) from the particle spread
    band_domega: list = field(default_factory=list)

    def series(self, channel: str = "delta") -> np.ndarray:
        return np.array(self.mape_delta if channel == "delta" else self.mape_domega)


@dataclass
class TransferResult:
    scratch: Curve
    warm: Curve
    target_scratch: int | None
    target_warm: int | None
    channel: str
    config: dict

    @property
    def ratio(self) -> float:
        if not self.target_scratch:
            return float("inf") if self.target_warm else 0.0
        return float(self.target_warm) / float(self.target_scratch)


def iterations_to_target(iterations, values, final: float, tol: float = 0.10) -> int | None:
    """First iteration whose MAPE is within ``tol`` (relative) of ``final``."""
    for it, v in zip(iterations, values):
        if np.isfinite(v) and v <= final * (1.0 + tol):
            return int(it)
    return None


def _tracked_fit(cfg: ExperimentConfig, train: Dataset, score: Dataset, grid, warm=None) -> Curve:
    """Fit while scoring the posterior at the iterations in ``grid``."""
    grid = sorted(set(int(g) for g in grid))
    curve = Curve([], [], [], [], [])
    sc = np.array([score.norm.scale["delta"], score.norm.scale["domega"]])
    L = bpinn.Layout()

    def record(it, X):
        lams = np.logaddexp(0.0, X[:, L.lam])
        rec = reconstruct(lams.mean(axis=0), score)
        m = dataset_mape(score, rec, cfg.mape_floor)
        per = reconstruct_batch(lams, score)
        each = []
        for c, name in enumerate(("delta", "domega")):
            x = getattr(score, name)
            each.append([mape(x, per[p, :, c], cfg.mape_floor, sc[c]) for p in range(len(lams))])
        each = np.array(each)
        curve.iterations.append(it)
        curve.mape_delta.append(m["delta"])
        curve.mape_domega.append(m["domega"])
        for c, band in ((0, curve.band_delta), (1, curve.band_domega)):
            v = each[c][np.isfinite(each[c])]
            band.append((float(np.percentile(v, 2.5)), float(np.percentile(v, 97.5)))
                        if len(v) else (float("nan"), float("nan")))

    rng = Rng(cfg.seed).child("fit", "bpinn")
    if 0 in grid:
        if warm is None:
            X0 = bpinn.init_particles(rng, cfg.particles, cfg.prior, L.hidden,
                                      bpinn.SvgdSettings().init)
        elif warm.norm != train.norm:
            X0 = bpinn.warm_start_from(warm, train.norm)
        else:
            X0 = warm.particles
        record(0, X0)

    def cb(it, X, _lp):
        if it in grid:
            record(it, X)

    if warm is None:
        bpinn.svgd_fit(train, cfg.n_c, cfg.prior, cfg.particles, max(grid), rng, callback=cb)
    else:
        bpinn.svgd_fit(train, cfg.n_c, cfg.prior, cfg.particles, max(grid), rng,
                       warm_start=warm, callback=cb)
    return curve


def run_transfer(source: tuple, pretrain_iters: int, target: ExperimentConfig, iteration_grid,
                 channel: str = "delta", pretrained: Posterior | None = None) -> TransferResult:
    """From-scratch and warm-started MAPE curves on ``target``.

    ``source`` is ``(grid, dynamics)``; its posterior is fitted for
    ``pretrain_iters`` iterations unless ``pretrained`` is given.
    """
    target = target.replace(method="bpinn")
    if pretrained is None:
        src_cfg = target.replace(grid=source[0], dynamics=source[1], iterations=pretrain_iters,
                                 n_c=0, transfer=None)
        src_train, _ = datasets_for(src_cfg)
        pretrained = fit_dataset(src_cfg, src_train).model
    train, score = datasets_for(target)
    scratch = _tracked_fit(target, train, score, iteration_grid)
    warm = _tracked_fit(target, train, score, iteration_grid, warm=pretrained)
    final = scratch.series(channel)[-1]
    return TransferResult(
        scratch, warm,
        iterations_to_target(scratch.iterations, scratch.series(channel), final),
        iterations_to_target(warm.iterations, warm.series(channel), final),
        channel,
        {"source": list(source), "pretrain_iters": int(pretrain_iters), "target": target.to_dict(),
         "iteration_grid": sorted(set(int(g) for g in iteration_grid))},
    )
