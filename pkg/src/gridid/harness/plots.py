"""Standalone SVG figures for campaign results (deterministic output)."""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .results import fresh_path


def _pyplot():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    matplotlib.rcParams["svg.hashsalt"] = "gridid"
    matplotlib.rcParams["svg.fonttype"] = "path"
    return plt


def _save(fig, path) -> Path:
    path = fresh_path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", metadata={"Date": None})
    _pyplot().close(fig)
    return path


def comparison_svg(records, path, channel: str = "delta") -> Path:
    """Grouped bars of MAPE per cell label and method (median over seeds)."""
    plt = _pyplot()
    cells, methods, vals = [], [], {}
    for r in records:
        c = r.config
        label = f"{c.grid}-{c.dynamics}"
        if label not in cells:
            cells.append(label)
        if c.method not in methods:
            methods.append(c.method)
        v = getattr(r, f"mape_{channel}")
        vals.setdefault((label, c.method), []).append(np.nan if v is None else v)
    fig, ax = plt.subplots(figsize=(max(4, 1.2 * len(cells)), 3.2))
    w = 0.8 / max(1, len(methods))
    x = np.arange(len(cells))
    for k, m in enumerate(methods):
        y = [np.nanmedian(vals.get((c, m), [np.nan])) for c in cells]
        ax.bar(x + k * w, y, w, label=m)
    ax.set_xticks(x + 0.4 - w / 2, cells, rotation=30, ha="right")
    ax.set_ylabel(f"MAPE {channel} [%]")
    ax.set_yscale("log")
    ax.legend(frameon=False)
    fig.tight_layout()
    return _save(fig, path)


def prior_heatmap_svg(records, path, channel: str = "delta") -> Path:
    plt = _pyplot()
    mus = sorted({r.config.prior.mu for r in records})
    kappas = sorted({r.config.prior.kappa for r in records})
    Z = np.full((len(mus), len(kappas)), np.nan)
    for r in records:
        v = getattr(r, f"mape_{channel}")
        if v is not None:
            Z[mus.index(r.config.prior.mu), kappas.index(r.config.prior.kappa)] = v
    fig, ax = plt.subplots(figsize=(4, 3.2))
    im = ax.imshow(Z, origin="lower", aspect="auto", cmap="viridis")
    ax.set_xticks(range(len(kappas)), [f"{k:g}" for k in kappas])
    ax.set_yticks(range(len(mus)), [f"{m:g}" for m in mus])
    ax.set_xlabel("kappa")
    ax.set_ylabel("mu")
    fig.colorbar(im, ax=ax, label=f"MAPE {channel} [%]")
    fig.tight_layout()
    return _save(fig, path)


def sample_sweep_svg(records, path, channel: str = "delta") -> Path:
    plt = _pyplot()
    series = {}
    for r in records:
        k = r.extra.get("n_c_multiplier", r.config.n_c / r.config.n_z)
        v = getattr(r, f"mape_{channel}")
        series.setdefault(k, []).append((r.config.n_z, np.nan if v is None else v))
    fig, ax = plt.subplots(figsize=(4, 3.2))
    for k in sorted(series):
        pts = sorted(series[k])
        ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=f"N_c = {k:g} N_z")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("N_z")
    ax.set_ylabel(f"MAPE {channel} [%]")
    ax.legend(frameon=False)
    fig.tight_layout()
    return _save(fig, path)


def transfer_svg(result, path) -> Path:
    plt = _pyplot()
    ch = result.channel
    fig, ax = plt.subplots(figsize=(4.5, 3.2))
    for name, curve in (("from scratch", result.scratch), ("warm start", result.warm)):
        it = np.array(curve.iterations)
        ax.plot(it, curve.series(ch), label=name)
        band = np.array(curve.band_delta if ch == "delta" else curve.band_domega)
        if len(band):
            ax.fill_between(it, band[:, 0], band[:, 1], alpha=0.25)
    ax.set_yscale("log")
    ax.set_xlabel("iteration")
    ax.set_ylabel(f"MAPE {ch} [%]")
    ax.legend(frameon=False)
    fig.tight_layout()
    return _save(fig, path)
