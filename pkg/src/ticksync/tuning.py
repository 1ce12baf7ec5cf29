"""Data-driven penalty selection through artificial masking.

Candidate penalty pairs are scored by hiding a random fraction of the
observed prices, re-solving on the remainder, and measuring the price
error on the hidden entries.  The consensus penalty is tied to the
nuclear one (eta = 10 lambda); masks are shared across candidates so
comparisons use common random numbers.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, TickSyncError
from .panel import MaskMatrix, ObservationPanel, apply_mask, generate_mask
from .solver import SolverConfig, reconstruct_prices, synchronize

__all__ = [
    "TuningGrid",
    "TuningRecord",
    "TuningResult",
    "imputation_error",
    "select_parameters",
    "ETA_OVER_LAMBDA",
]

log = logging.getLogger(__name__)

ETA_OVER_LAMBDA = 10.0


@dataclass(frozen=True)
class TuningGrid:
    mu_candidates: tuple[float, ...]
    lambda_candidates: tuple[float, ...]
    mask_probs: tuple[float, ...] = (0.1, 0.3)
    repetitions: int = 1
    seed: int = 0

    def __post_init__(self):
        if not self.mu_candidates or not self.lambda_candidates:
            raise ConfigError("candidate sets must be nonempty")
        if any(v <= 0 for v in self.mu_candidates + self.lambda_candidates):
            raise ConfigError("candidates must be positive")
        if any(not 0 < p < 1 for p in self.mask_probs):
            raise ConfigError("mask probabilities must lie in (0, 1)")
        if self.repetitions < 1:
            raise ConfigError("repetitions must be >= 1")


@dataclass(frozen=True)
class TuningRecord:
    mu: float
    lam: float
    eta: float
    mask_p: float
    rep: int
    abs_error: float
    rel_error: float


@dataclass(frozen=True)
class TuningResult:
    mu: float
    lam: float
    eta: float
    records: tuple[TuningRecord, ...] = field(repr=False)

    def mean_abs_error(self, mu: float, lam: float) -> float:
        vals = [r.abs_error for r in self.records if r.mu == mu and r.lam == lam]
        return float(np.mean(vals))


def imputation_error(
    p_hat: np.ndarray, p_true: np.ndarray, mask: MaskMatrix, kind: str = "absolute"
) -> float:
    """Price error over the masked entries only.

    absolute: ||(est - true) o M||_F / ||M||_F
    relative: ||(est - true) o M||_F / ||true o M||_F
    """
    p_hat = np.asarray(p_hat)
    p_true = np.asarray(p_true)
    if p_hat.shape != p_true.shape or p_hat.shape != mask.dims:
        raise ConfigError("price matrices and mask must share dimensions")
    m = mask.entries
    if not m.any():
        raise ConfigError("mask is empty")
    num = float(np.linalg.norm(p_hat[m] - p_true[m]))
    if kind == "absolute":
        return num / math.sqrt(mask.n_masked)
    if kind == "relative":
        den = float(np.linalg.norm(p_true[m]))
        if den == 0:
            raise ConfigError("relative error undefined: masked truth has zero norm")
        return num / den
    raise ConfigError(f"unknown error kind {kind!r}")


def _mask_seed(base: int, p_index: int, rep: int) -> int:
    return int(np.random.SeedSequence(entropy=base, spawn_key=(p_index, rep)).generate_state(1)[0])


def select_parameters(
    panel: ObservationPanel,
    grid: TuningGrid,
    tol: float = 1e-5,
    max_iter: int = 500,
    init_rank: int = 3,
) -> TuningResult:
    """Pick the candidate pair minimizing the mean absolute imputation
    error over all masks; ties go to the smallest lambda, then mu.

    A cycle that cannot produce prices (solver or masking failure)
    counts as +inf for that candidate.
    """
    truth = _observed_price_matrix(panel)
    masks: list[tuple[float, int, MaskMatrix, ObservationPanel]] = []
    for pi_idx, p in enumerate(grid.mask_probs):
        for rep in range(grid.repetitions):
            mask = generate_mask(panel, p, _mask_seed(grid.seed, pi_idx, rep))
            masks.append((p, rep, mask, apply_mask(panel, mask)))

    records: list[TuningRecord] = []
    best: tuple[float, float, float] | None = None  # (error, lam, mu)
    best_pair = None
    for mu in grid.mu_candidates:
        for lam in grid.lambda_candidates:
            eta = ETA_OVER_LAMBDA * lam
            config = SolverConfig(mu=mu, lam=lam, eta=eta, tol=tol, max_iter=max_iter, init_rank=init_rank)
            errs = []
            for p, rep, mask, masked_panel in masks:
                try:
                    result = synchronize(masked_panel, config)
                    prices = reconstruct_prices(result.delta_hat, masked_panel)
                    abs_err = imputation_error(prices, truth, mask, "absolute")
                    rel_err = imputation_error(prices, truth, mask, "relative")
                except TickSyncError as exc:
                    log.warning("tuning cycle failed for mu=%g lam=%g p=%g rep=%d: %s", mu, lam, p, rep, exc)
                    abs_err, rel_err = math.inf, math.inf
                records.append(TuningRecord(mu, lam, eta, p, rep, abs_err, rel_err))
                errs.append(abs_err)
            mean_err = float(np.mean(errs))
            key = (mean_err, lam, mu)
            if best is None or key < best:
                best = key
                best_pair = (mu, lam)
    mu_hat, lam_hat = best_pair
    return TuningResult(mu_hat, lam_hat, ETA_OVER_LAMBDA * lam_hat, tuple(records))


def _observed_price_matrix(panel: ObservationPanel) -> np.ndarray:
    """Observed log prices on the full grid; unobserved cells are 0 and
    never scored because masks only cover observed entries."""
    out = np.zeros((panel.n_assets, panel.grid.n_points))
    for i, s in enumerate(panel.series):
        out[i, s.obs_idx] = s.log_price
    return out
