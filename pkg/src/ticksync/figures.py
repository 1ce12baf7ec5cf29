"""Figure rendering for the report paths.

Every CLI command that writes a delimited report can render a matching
figure next to it.  Rendering is headless (Agg) and file-only.
"""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = [
    "save_method_bars",
    "save_tuning_curves",
    "save_eigen_shares",
    "save_beta_paths",
    "save_backtest_bars",
    "save_imputation_curves",
]

_DPI = 150


def save_method_bars(path: str | Path, rows: Sequence[Mapping], metric: str, title: str) -> Path:
    """Bar chart of one metric's mean per method (with sd whiskers)."""
    sel = [r for r in rows if r["metric"] == metric]
    methods = [r["method"] for r in sel]
    means = [r["mean"] for r in sel]
    sds = [r.get("sd", 0.0) for r in sel]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(methods, means, yerr=sds, capsize=4, color="steelblue")
    ax.set_ylabel(metric)
    ax.set_title(title)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return path


def save_tuning_curves(path: str | Path, records: Sequence, eta_records: Sequence | None = None) -> Path:
    """Mean absolute error as a function of each penalty parameter."""
    recs = list(records)
    n_panels = 3 if eta_records else 2
    fig, axes = plt.subplots(1, n_panels, figsize=(4 * n_panels, 3.5))

    def curve(ax, param):
        levels = sorted({getattr(r, param) for r in recs})
        means = [
            np.mean([r.abs_error for r in recs if getattr(r, param) == v]) for v in levels
        ]
        ax.plot(levels, means, marker="o")
        ax.axvline(levels[int(np.argmin(means))], linestyle=":", color="grey")
        ax.set_xlabel(param)
        ax.set_ylabel("absolute error")
        ax.set_xscale("log")

    curve(axes[0], "mu")
    curve(axes[1], "lam")
    if eta_records:
        erecs = list(eta_records)
        etas = sorted({r.eta for r in erecs})
        means = [np.mean([r.abs_error for r in erecs if r.eta == v]) for v in etas]
        axes[2].plot(etas, means, marker="o")
        axes[2].set_xlabel("eta")
        axes[2].set_ylabel("absolute error")
        axes[2].set_xscale("log")
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return path


def save_eigen_shares(path: str | Path, rows: Sequence[Mapping]) -> Path:
    """Leading eigenvalue shares per missingness group, one line per
    (method, eigenvalue rank)."""
    fig, ax = plt.subplots(figsize=(6.5, 4))
    keys = sorted({(r["method"], r["eig_rank"]) for r in rows})
    for method, rank in keys:
        pts = sorted(
            (r["group"], r["value"]) for r in rows if r["method"] == method and r["eig_rank"] == rank
        )
        ax.plot([g for g, _ in pts], [v for _, v in pts], marker="o", label=f"{method} eig{rank}")
    ax.set_xlabel("group (0 = most missing)")
    ax.set_ylabel("eigenvalue share of trace")
    ax.legend()
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return path


def save_beta_paths(path: str | Path, betas: Mapping[str, np.ndarray]) -> Path:
    fig, ax = plt.subplots(figsize=(7, 4))
    for asset, series in betas.items():
        ax.plot(series, label=asset, linewidth=1.0)
    ax.axhline(0.0, color="grey", linewidth=0.7)
    ax.set_xlabel("window end index")
    ax.set_ylabel("spot beta")
    if len(betas) <= 12:
        ax.legend(fontsize=8)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return path


def save_backtest_bars(path: str | Path, rows: Sequence[Mapping]) -> Path:
    """Sharpe ratio by method, grouped over asset groups."""
    methods = sorted({r["method"] for r in rows})
    groups = sorted({r["group"] for r in rows})
    width = 0.8 / max(1, len(methods))
    fig, ax = plt.subplots(figsize=(6.5, 4))
    for k, method in enumerate(methods):
        xs, ys = [], []
        for gi, g in enumerate(groups):
            for r in rows:
                if r["method"] == method and r["group"] == g:
                    xs.append(gi + k * width)
                    ys.append(r["SR"] if r["SR"] != "" else np.nan)
        ax.bar(xs, ys, width=width, label=method)
    ax.set_xticks([gi + 0.4 - width / 2 for gi in range(len(groups))])
    ax.set_xticklabels([str(g) for g in groups])
    ax.set_xlabel("group")
    ax.set_ylabel("Sharpe ratio")
    ax.legend()
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return path


def save_imputation_curves(path: str | Path, rows: Sequence[Mapping]) -> Path:
    """Mean absolute imputation error vs mask probability per method."""
    methods = sorted({r["method"] for r in rows})
    fig, ax = plt.subplots(figsize=(6, 4))
    for method in methods:
        ps = sorted({r["mask_p"] for r in rows if r["method"] == method})
        means = [
            np.mean([r["abs_error"] for r in rows if r["method"] == method and r["mask_p"] == p])
            for p in ps
        ]
        ax.plot(ps, means, marker="o", label=method)
    ax.set_xlabel("mask probability")
    ax.set_ylabel("mean absolute error")
    ax.legend()
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return path
