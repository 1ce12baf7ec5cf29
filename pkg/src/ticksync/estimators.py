"""Downstream estimators: realized / factor-structured covariance,
eigenvalue shares, jump truncation, and local-window market betas."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigError
from .panel import ObservationPanel

__all__ = [
    "CovarianceEstimate",
    "realized_cov",
    "pca_factor_cov",
    "eigen_by_group",
    "group_by_missingness",
    "bipower_variation",
    "truncate_jumps",
    "spot_beta",
]


@dataclass(frozen=True)
class CovarianceEstimate:
    sigma: np.ndarray        # (N, N) symmetric
    rank_used: int
    eigenvalues: np.ndarray  # full spectrum of sigma, nonincreasing


def realized_cov(returns: np.ndarray) -> np.ndarray:
    """Sum of outer products of the return columns."""
    returns = np.atleast_2d(np.asarray(returns, dtype=np.float64))
    return returns @ returns.T


def pca_factor_cov(returns: np.ndarray, r: int) -> CovarianceEstimate:
    """Rank-r spectral part of the realized covariance plus the diagonal
    residual, so the diagonal of the estimate matches exactly."""
    rc = realized_cov(returns)
    n = rc.shape[0]
    if not 1 <= r < n:
        raise ConfigError(f"factor rank must satisfy 1 <= r < {n}, got {r}")
    evals, evecs = np.linalg.eigh(rc)
    order = np.argsort(evals)[::-1]
    evals, evecs = evals[order], evecs[:, order]
    lowrank = (evecs[:, :r] * evals[:r]) @ evecs[:, :r].T
    sigma = lowrank + np.diag(np.diag(rc) - np.diag(lowrank))
    sigma = 0.5 * (sigma + sigma.T)
    spectrum = np.sort(np.linalg.eigvalsh(sigma))[::-1]
    return CovarianceEstimate(sigma=sigma, rank_used=r, eigenvalues=spectrum)


def eigen_by_group(
    returns: np.ndarray, groups: Sequence[Sequence[int]], k: int
) -> np.ndarray:
    """Top-k eigenvalue shares (eigenvalue / trace) of each group's
    realized covariance; rows follow the group order."""
    out = np.empty((len(groups), k))
    for g, members in enumerate(groups):
        members = np.asarray(members, dtype=np.int64)
        if members.size < k:
            raise ConfigError(f"group {g} has {members.size} assets, fewer than k={k}")
        rc = realized_cov(returns[members])
        evals = np.sort(np.linalg.eigvalsh(rc))[::-1]
        out[g] = evals[:k] / np.trace(rc)
    return out


def group_by_missingness(panel: ObservationPanel, n_groups: int) -> list[np.ndarray]:
    """Split assets into equal contiguous groups sorted from most to
    least missing observations (group 0 = most missing)."""
    if panel.n_assets % n_groups != 0:
        raise ConfigError(f"{panel.n_assets} assets do not split into {n_groups} equal groups")
    counts = np.array([panel.grid.n_points - len(s) for s in panel.series])
    order = np.argsort(-counts, kind="stable")
    size = panel.n_assets // n_groups
    return [order[g * size : (g + 1) * size] for g in range(n_groups)]


def bipower_variation(returns: np.ndarray) -> float:
    """(pi/2) sum |r_j| |r_{j-1}|, robust to isolated jumps."""
    r = np.abs(np.asarray(returns, dtype=np.float64).ravel())
    return float(np.pi / 2.0 * np.sum(r[1:] * r[:-1]))


def truncate_jumps(returns: np.ndarray, multiplier: float = 5.0) -> tuple[np.ndarray, int]:
    """Zero out returns beyond multiplier * sqrt(BV / m).

    Returns the truncated copy and how many entries were zeroed.
    """
    r = np.asarray(returns, dtype=np.float64)
    m = r.size
    if m < 2:
        raise ConfigError("need at least 2 returns to calibrate the threshold")
    threshold = multiplier * np.sqrt(bipower_variation(r) / m)
    flag = np.abs(r) > threshold
    out = r.copy()
    out[flag] = 0.0
    return out, int(flag.sum())


def spot_beta(stock_returns: np.ndarray, market_returns: np.ndarray, window: int) -> np.ndarray:
    """Rolling-window regression slope of stock on market returns.

    Window t covers the k returns ending at t; windows with zero market
    variation are flagged as NaN rather than fabricated.
    """
    rs = np.asarray(stock_returns, dtype=np.float64).ravel()
    rm = np.asarray(market_returns, dtype=np.float64).ravel()
    if rs.size != rm.size:
        raise ConfigError(f"series lengths differ: {rs.size} vs {rm.size}")
    if window < 2:
        raise ConfigError(f"window must be >= 2, got {window}")
    if rs.size < window:
        raise ConfigError(f"need at least {window} returns, got {rs.size}")
    kernel = np.ones(window)
    cov = np.convolve(rm * rs, kernel, mode="valid")
    var = np.convolve(rm * rm, kernel, mode="valid")
    with np.errstate(divide="ignore", invalid="ignore"):
        beta = np.where(var > 0, cov / np.where(var > 0, var, 1.0), np.nan)
    return beta
