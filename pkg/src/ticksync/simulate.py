"""Synthetic asynchronous price panels with full ground truth.

Prices follow a factor model: a small number of latent factors with
square-root stochastic volatility and correlated innovations drive all
assets through normalized loadings, plus a cross-sectionally correlated
idiosyncratic diffusion.  Observation times arrive cell-by-cell from a
Poisson process, independently per asset, with the first point of each
day always observed.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .panel import GridSpec, ObservationPanel, TickSeries

__all__ = ["DgpConfig", "DgpOutput", "simulate", "sample_poisson_times"]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class DgpConfig:
    """Everything the generator needs; defaults follow the baseline setup."""

    n_assets: int = 100
    n_factors: int = 3
    days: int = 5
    steps_per_day: int = 390
    dt: float = 1.0 / 390.0
    kappa: float = 3.0
    sigma_bar_sq: float = 0.09
    vol_of_vol: float = 0.3
    drift: tuple[float, ...] = (0.05, 0.03, 0.02)
    factor_strength: float = 1.0      # exponent on N in the loading normalization
    noise_scale: float = 0.1          # variance multiplier on the idiosyncratic term
    arrival_intensities: tuple[float, ...] = (1.0,)  # per grid step; contiguous equal asset groups
    corr_decay: float = 0.6
    block_size: int = 10
    seed: int = 0

    def __post_init__(self):
        if min(self.kappa, self.sigma_bar_sq, self.vol_of_vol) <= 0:
            raise ConfigError("kappa, sigma_bar_sq and vol_of_vol must be positive")
        if not 0 < self.factor_strength <= 1:
            raise ConfigError("factor_strength must be in (0, 1]")
        if any(lam <= 0 for lam in self.arrival_intensities):
            raise ConfigError("arrival intensities must be positive")
        if len(self.drift) != self.n_factors:
            raise ConfigError("drift must have one entry per factor")
        if self.noise_scale < 0:
            raise ConfigError("noise_scale must be nonnegative")
        if self.n_assets % len(self.arrival_intensities) != 0:
            raise ConfigError("asset count must split evenly across intensity groups")

    @property
    def n_increments(self) -> int:
        return self.days * self.steps_per_day

    def feller_satisfied(self) -> bool:
        return 2 * self.kappa * self.sigma_bar_sq >= self.vol_of_vol**2


@dataclass(frozen=True)
class DgpOutput:
    config: DgpConfig
    panel: ObservationPanel
    delta_true: np.ndarray    # (N, n) latent increments
    pi_true: np.ndarray       # (N, n) systematic (factor) increments
    sigma_true: np.ndarray    # (N, N) integrated covariance over the horizon
    factor_paths: np.ndarray  # (r, n+1) cumulated factor levels

    def day_slices(self) -> list[slice]:
        spd = self.config.steps_per_day
        return [slice(d * spd, (d + 1) * spd) for d in range(self.config.days)]


def sample_poisson_times(n: int, intensity: float, seed) -> np.ndarray:
    """Observed cell indices on a grid of n increments.

    Cell j >= 1 is observed iff the asset's Poisson stream (rate
    ``intensity`` per grid step) has at least one arrival inside the
    cell, i.e. independently with probability 1 - exp(-intensity).
    Index 0 is always included.
    """
    if intensity <= 0:
        raise ConfigError(f"intensity must be positive, got {intensity}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    if n <= 0:
        return np.array([0], dtype=np.int64)
    hit = rng.random(n) < -np.expm1(-intensity)
    return np.concatenate([[0], 1 + np.nonzero(hit)[0]]).astype(np.int64)


def _ar1_corr(decay: float, size: int) -> np.ndarray:
    idx = np.arange(size)
    return decay ** np.abs(idx[:, None] - idx[None, :])


def _factor_corr(decay: float, r: int) -> np.ndarray:
    # lower-triangular H with decay^(i-j), normalized to a unit-diagonal
    # correlation matrix through diag(HH')^{-1/2}
    h = np.tril(_ar1_corr(decay, r))
    hh = h @ h.T
    d = 1.0 / np.sqrt(np.diag(hh))
    return d[:, None] * hh * d[None, :]


def _block_corr(decay: float, n: int, block: int) -> np.ndarray:
    out = np.eye(n)
    for lo in range(0, n, block):
        hi = min(lo + block, n)
        out[lo:hi, lo:hi] = _ar1_corr(decay, hi - lo)
    return out


def _heston_paths(rng: np.random.Generator, n_paths: int, n_steps: int, cfg: DgpConfig) -> np.ndarray:
    """Square-root variance paths (n_paths, n_steps+1), full-truncation Euler."""
    kappa, vbar, s, dt = cfg.kappa, cfg.sigma_bar_sq, cfg.vol_of_vol, cfg.dt
    v = np.empty((n_paths, n_steps + 1))
    v[:, 0] = rng.uniform(0.8 * vbar, 1.2 * vbar, size=n_paths)
    shocks = rng.standard_normal((n_paths, n_steps)) * np.sqrt(dt)
    for j in range(n_steps):
        vp = np.maximum(v[:, j], 0.0)
        v[:, j + 1] = v[:, j] + kappa * (vbar - vp) * dt + s * np.sqrt(vp) * shocks[:, j]
    return np.maximum(v, 0.0)


def _loadings(rng: np.random.Generator, cfg: DgpConfig) -> np.ndarray:
    raw = np.empty((cfg.n_assets, cfg.n_factors))
    raw[:, 0] = rng.uniform(0.25, 1.75, size=cfg.n_assets)
    if cfg.n_factors > 1:
        raw[:, 1:] = rng.normal(0.0, 0.5, size=(cfg.n_assets, cfg.n_factors - 1))
    gram = raw.T @ raw / cfg.n_assets**cfg.factor_strength
    evals, evecs = np.linalg.eigh(gram)
    inv_sqrt = (evecs / np.sqrt(evals)) @ evecs.T
    return raw @ inv_sqrt


def simulate(config: DgpConfig) -> DgpOutput:
    """Generate one replication: truth matrices plus the observed panel."""
    cfg = config
    rng = np.random.default_rng(cfg.seed)
    n = cfg.n_increments
    dt = cfg.dt

    if not cfg.feller_satisfied():
        log.info("Feller condition violated: 2*kappa*sigma_bar_sq < vol_of_vol^2")

    # factor block
    rho = _factor_corr(cfg.corr_decay, cfg.n_factors)
    chol_rho = np.linalg.cholesky(rho)
    factor_var = _heston_paths(rng, cfg.n_factors, n, cfg)          # (r, n+1)
    factor_vol = np.sqrt(factor_var[:, :-1])                        # left endpoints
    z_factor = rng.standard_normal((cfg.n_factors, n))
    drift = np.asarray(cfg.drift)[:, None] * dt
    dV = drift + factor_vol * (chol_rho @ z_factor) * np.sqrt(dt)   # (r, n)

    beta = _loadings(rng, cfg)
    pi_true = beta @ dV

    # idiosyncratic block
    rho_star = _block_corr(cfg.corr_decay, cfg.n_assets, cfg.block_size)
    chol_star = np.linalg.cholesky(rho_star)
    idio_var = _heston_paths(rng, cfg.n_assets, n, cfg)
    idio_vol = np.sqrt(idio_var[:, :-1])
    z_idio = rng.standard_normal((cfg.n_assets, n))
    dZ = np.sqrt(cfg.noise_scale) * idio_vol * (chol_star @ z_idio) * np.sqrt(dt)

    delta_true = pi_true + dZ

    # integrated covariance: Riemann sum of the spot covariance, which
    # collapses to a vol-path Gram matrix weighted by the correlations
    fac_cov = rho * (factor_vol @ factor_vol.T) * dt
    idio_cov = rho_star * (idio_vol @ idio_vol.T) * dt
    sigma_true = beta @ fac_cov @ beta.T + cfg.noise_scale * idio_cov

    # prices and asynchronous observation
    x0 = np.log(100.0) + rng.normal(0.0, 0.25, size=cfg.n_assets)
    prices = np.concatenate(
        [x0[:, None], x0[:, None] + np.cumsum(delta_true, axis=1)], axis=1
    )
    group_size = cfg.n_assets // len(cfg.arrival_intensities)
    series = []
    for i in range(cfg.n_assets):
        lam = cfg.arrival_intensities[min(i // group_size, len(cfg.arrival_intensities) - 1)]
        day_idx = []
        for d in range(cfg.days):
            local = sample_poisson_times(cfg.steps_per_day, lam, rng)
            day_idx.append(local + d * cfg.steps_per_day)
        idx = np.unique(np.concatenate(day_idx))
        series.append(TickSeries(f"A{i:04d}", idx, prices[i, idx]))

    grid = GridSpec(t0=0.0, step=60.0, count=n)
    panel = ObservationPanel(grid, tuple(series))
    factor_paths = np.concatenate(
        [np.zeros((cfg.n_factors, 1)), np.cumsum(dV, axis=1)], axis=1
    )
    return DgpOutput(cfg, panel, delta_true, pi_true, sigma_true, factor_paths)
