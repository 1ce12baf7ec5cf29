"""Gross-exposure-constrained minimum-variance allocation and backtest."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import cvxpy as cp
import numpy as np

from .errors import ConfigError
from .estimators import pca_factor_cov, realized_cov, truncate_jumps

__all__ = ["PortfolioConfig", "min_variance_weights", "backtest", "BacktestResult"]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PortfolioConfig:
    gross_exposure: float = 2.0
    rebalance_days: int = 21
    trading_days_per_year: int = 252
    factor_rank: int = 3
    truncate_multiplier: float | None = None  # per-asset jump truncation if set

    def __post_init__(self):
        if self.gross_exposure < 1:
            raise ConfigError("gross exposure must be >= 1 (weights sum to 1)")
        if self.rebalance_days < 1:
            raise ConfigError("rebalance period must be >= 1 day")


@dataclass(frozen=True)
class BacktestResult:
    annual_return: float
    annual_std: float
    sharpe: float | None  # None when the std is zero
    n_periods: int
    weights: tuple[np.ndarray, ...]


def _repair_psd(sigma: np.ndarray) -> np.ndarray:
    sigma = 0.5 * (sigma + sigma.T)
    min_eig = float(np.linalg.eigvalsh(sigma)[0])
    if min_eig < 1e-10:
        load = 1e-8 * np.trace(sigma) / sigma.shape[0] + max(0.0, -min_eig)
        sigma = sigma + load * np.eye(sigma.shape[0])
    return sigma


def min_variance_weights(sigma: np.ndarray, c: float) -> np.ndarray:
    """Minimize w' Sigma w subject to sum(w) = 1 and ||w||_1 <= c.

    After the solve the budget constraint is re-centered exactly; the
    shift stays inside the gross-exposure slack.
    """
    sigma = np.asarray(sigma, dtype=np.float64)
    if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1]:
        raise ConfigError(f"covariance must be square, got {sigma.shape}")
    if c < 1:
        raise ConfigError("gross exposure below 1 is infeasible with a unit budget")
    n = sigma.shape[0]
    if n == 1:
        return np.array([1.0])
    sigma = _repair_psd(sigma)
    w = cp.Variable(n)
    problem = cp.Problem(
        cp.Minimize(cp.quad_form(w, cp.psd_wrap(sigma))),
        [cp.sum(w) == 1, cp.norm1(w) <= c],
    )
    try:
        problem.solve(solver=cp.ECOS, abstol=1e-11, reltol=1e-11, feastol=1e-11)
    except cp.error.SolverError:
        problem.solve(solver=cp.SCS, eps=1e-9)
    if w.value is None:
        raise ConfigError("quadratic program failed to solve")
    weights = np.asarray(w.value, dtype=np.float64)
    weights += (1.0 - weights.sum()) / n
    return weights


def backtest(
    panel_stream: Sequence,
    synchronizer: Callable[[object], np.ndarray],
    config: PortfolioConfig = PortfolioConfig(),
) -> BacktestResult:
    """Monthly-style walk-forward: estimate on one period, hold through
    the next, collect the realized per-increment portfolio returns.

    ``panel_stream`` yields per-period panels; ``synchronizer`` maps a
    panel to an (N, m) increment matrix and is used for both estimation
    and realization so comparisons across methods are like-for-like.
    Periods whose covariance cannot be estimated are skipped.
    """
    panels = list(panel_stream)
    if len(panels) < 2:
        raise ConfigError("backtest needs at least 2 periods")
    port_returns: list[np.ndarray] = []
    weights_used: list[np.ndarray] = []
    steps_per_period: list[int] = []
    for est_panel, next_panel in zip(panels[:-1], panels[1:]):
        try:
            rets = np.asarray(synchronizer(est_panel))
            if config.truncate_multiplier is not None:
                rets = np.stack(
                    [truncate_jumps(row, config.truncate_multiplier)[0] for row in rets]
                )
            n = rets.shape[0]
            if n == 1:
                sigma = realized_cov(rets)
            else:
                rank = min(config.factor_rank, n - 1)
                sigma = pca_factor_cov(rets, rank).sigma
            w = min_variance_weights(sigma, config.gross_exposure)
        except ConfigError as exc:
            log.warning("skipping period: %s", exc)
            continue
        realized = np.asarray(synchronizer(next_panel))
        port_returns.append(w @ realized)
        weights_used.append(w)
        steps_per_period.append(realized.shape[1])
    if not port_returns:
        raise ConfigError("no usable estimation periods")
    r = np.concatenate(port_returns)
    # annualize per-increment moments: steps per year = trading days x intraday steps
    steps_per_day = max(1, int(round(np.mean(steps_per_period) / config.rebalance_days)))
    ann = config.trading_days_per_year * steps_per_day
    ar = float(np.mean(r) * ann)
    sd = float(np.std(r, ddof=0) * math.sqrt(ann))
    sharpe = ar / sd if sd > 0 else None
    return BacktestResult(ar, sd, sharpe, len(port_returns), tuple(weights_used))
