"""Experiment orchestration: scenario registry, per-replication pipeline,
and the masking/imputation study.  Both the CLI and the acceptance suite
drive everything through this module so results match byte for byte.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .baselines import linear_interp, pre_average, previous_tick, refresh_time
from .errors import ConfigError
from .evalmetrics import COV_NORMS, cov_error, increment_error_l1
from .estimators import pca_factor_cov
from .linsys import apply_A, build_system
from .panel import ObservationPanel, apply_mask, generate_mask, split_days
from .simulate import DgpConfig, DgpOutput, simulate
from .solver import SolverConfig, reconstruct_prices, synchronize
from .tuning import imputation_error

__all__ = [
    "METHODS",
    "SCENARIOS",
    "McResult",
    "scenario_config",
    "default_block",
    "solve_nn_days",
    "method_returns",
    "run_replication",
    "run_scenario",
    "replication_seeds",
    "imputation_study",
    "near_isometry_stat",
    "summarize",
]

log = logging.getLogger(__name__)

METHODS = ("nn", "pi", "li", "rt", "pa")

# Scenario registry: overrides applied to the baseline generator config.
SCENARIOS: dict[str, dict] = {
    "table1-N20": {"n_assets": 20},
    "table1-N50": {"n_assets": 50},
    "table1-N100": {"n_assets": 100},
    "table1-N120": {"n_assets": 120},
    "freq-30s": {"steps_per_day": 780, "dt": 1.0 / 780.0},
    "freq-1min": {},
    "freq-5min": {"steps_per_day": 78, "dt": 1.0 / 78.0},
    "table2-sparse": {"n_assets": 50, "arrival_intensities": (0.5, 0.5)},
    "table2-mixed": {"n_assets": 50, "arrival_intensities": (0.5, 2.0)},
    "table2-dense": {"n_assets": 50, "arrival_intensities": (2.0, 2.0)},
    "alpha-0.8": {"factor_strength": 0.8},
    "alpha-0.5": {"factor_strength": 0.5},
    "alpha-0.2": {"factor_strength": 0.2},
}


def scenario_config(name: str, **overrides) -> DgpConfig:
    if name not in SCENARIOS:
        raise ConfigError(f"unknown scenario {name!r}; available: {sorted(SCENARIOS)}")
    params = dict(SCENARIOS[name])
    params.update(overrides)
    return DgpConfig(**params)


def default_block(steps_per_day: int) -> int:
    """Pre-averaging block length: ceil(sqrt(n))."""
    return int(math.ceil(math.sqrt(steps_per_day)))


def solve_nn_days(
    output: DgpOutput, config: SolverConfig
) -> tuple[np.ndarray, np.ndarray, bool, int]:
    """Run the solver day by day and concatenate the increment estimates.

    Returns (delta_hat, pi_hat, all_converged, total_iterations).
    """
    panels = split_days(output.panel, output.config.steps_per_day)
    deltas, pis = [], []
    all_ok = True
    iters = 0
    for day_panel in panels:
        res = synchronize(day_panel, config)
        deltas.append(res.delta_hat)
        pis.append(res.pi_hat)
        all_ok &= res.converged
        iters += res.iterations
    return np.hstack(deltas), np.hstack(pis), all_ok, iters


def _pa_day_returns(day_panel: ObservationPanel, block: int) -> np.ndarray:
    return pre_average(day_panel, block)


def _pa_returns_on_grid(day_panel: ObservationPanel, block: int) -> np.ndarray:
    """Spread each block-to-block return uniformly over its block's cells.

    Cells whose right endpoint falls in the first block get zero (there
    is no preceding block mean), mirroring the information loss of the
    block subsampling.
    """
    rets = pre_average(day_panel, block)
    n_pts = day_panel.grid.n_points
    n = day_panel.grid.count
    out = np.zeros((day_panel.n_assets, n))
    sizes = [len(range(g * block, min((g + 1) * block, n_pts))) for g in range(rets.shape[1] + 1)]
    for c in range(n):
        g = (c + 1) // block
        if g >= 1:
            out[:, c] = rets[:, g - 1] / sizes[g]
    return out


def method_returns(
    output: DgpOutput,
    method: str,
    solver_config: SolverConfig,
    block: int | None = None,
) -> dict:
    """Synchronized return matrices for one method.

    Returns a dict with ``cov_returns`` (input to the covariance
    estimator), ``increment_estimate`` (full-grid increments to score
    against the truth; None for the refresh-time subsample), and solver
    diagnostics for the nuclear-norm route.
    """
    spd = output.config.steps_per_day
    block = default_block(spd) if block is None else block
    if method == "nn":
        delta_hat, pi_hat, ok, iters = solve_nn_days(output, solver_config)
        return {
            "cov_returns": delta_hat,
            "increment_estimate": pi_hat,
            "converged": ok,
            "iterations": iters,
        }
    if method in ("pi", "li"):
        fill = previous_tick if method == "pi" else linear_interp
        rets = np.diff(fill(output.panel), axis=1)
        return {"cov_returns": rets, "increment_estimate": rets}
    day_panels = split_days(output.panel, spd)
    if method == "rt":
        rets = np.hstack([refresh_time(p).returns() for p in day_panels])
        return {"cov_returns": rets, "increment_estimate": None}
    if method == "pa":
        cov_rets = np.hstack([_pa_day_returns(p, block) for p in day_panels])
        inc = np.hstack([_pa_returns_on_grid(p, block) for p in day_panels])
        return {"cov_returns": cov_rets, "increment_estimate": inc}
    raise ConfigError(f"unknown method {method!r}; available: {METHODS}")


def run_replication(
    dgp: DgpConfig,
    solver_config: SolverConfig,
    methods: tuple[str, ...] = METHODS,
    factor_rank: int = 3,
) -> dict[str, dict[str, float]]:
    """One simulated panel scored by every method.

    Metrics per method: relative covariance errors in the three norms
    and (where defined) the mean relative increment error.
    """
    output = simulate(dgp)
    results: dict[str, dict[str, float]] = {}
    for method in methods:
        parts = method_returns(output, method, solver_config)
        rank = min(factor_rank, output.config.n_assets - 1)
        sigma_hat = pca_factor_cov(parts["cov_returns"], rank).sigma
        metrics = {
            f"cov_{norm}": cov_error(sigma_hat, output.sigma_true, norm)
            for norm in COV_NORMS
        }
        if parts["increment_estimate"] is not None:
            metrics["increment_l1"] = increment_error_l1(
                parts["increment_estimate"], output.pi_true
            )
        if "converged" in parts:
            metrics["converged"] = float(parts["converged"])
            metrics["iterations"] = float(parts["iterations"])
        results[method] = metrics
    return results


def replication_seeds(seed: int, reps: int) -> list[int]:
    state = np.random.SeedSequence(seed).generate_state(reps, dtype=np.uint32)
    return [int(s) for s in state]


@dataclass(frozen=True)
class McResult:
    scenario: str
    seeds: list[int]
    per_rep: list[dict[str, dict[str, float]]]

    def methods(self) -> list[str]:
        return list(self.per_rep[0])

    def metric(self, method: str, metric: str) -> np.ndarray:
        return np.array([rep[method][metric] for rep in self.per_rep if metric in rep[method]])

    def mean(self, method: str, metric: str) -> float:
        return float(np.mean(self.metric(method, metric)))


def _rep_task(args) -> dict:
    dgp, solver_config, methods, factor_rank = args
    return run_replication(dgp, solver_config, methods, factor_rank)


def run_scenario(
    scenario: str,
    reps: int,
    seed: int,
    solver_config: SolverConfig | None = None,
    methods: tuple[str, ...] = METHODS,
    workers: int = 1,
    factor_rank: int = 3,
    **dgp_overrides,
) -> McResult:
    """Replicate a scenario; aggregation is ordered by replication index
    so worker count never changes the result."""
    solver_config = solver_config or SolverConfig()
    base = scenario_config(scenario, **dgp_overrides)
    seeds = replication_seeds(seed, reps)
    tasks = [
        (replace(base, seed=s), solver_config, methods, factor_rank) for s in seeds
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            per_rep = list(pool.map(_rep_task, tasks))
    else:
        per_rep = [_rep_task(t) for t in tasks]
    return McResult(scenario, seeds, per_rep)


def summarize(result: McResult) -> list[dict]:
    """Long-format rows: scenario, method, metric, mean, sd."""
    rows = []
    for method in result.methods():
        metrics = sorted(result.per_rep[0][method])
        for metric in metrics:
            vals = result.metric(method, metric)
            rows.append(
                {
                    "scenario": result.scenario,
                    "method": method,
                    "metric": metric,
                    "mean": float(np.mean(vals)),
                    "sd": float(np.std(vals, ddof=1)) if vals.size > 1 else 0.0,
                }
            )
    return rows


def imputation_study(
    panel: ObservationPanel,
    mask_probs: tuple[float, ...],
    repetitions: int,
    solver_config: SolverConfig,
    seed: int = 0,
    methods: tuple[str, ...] = ("nn", "pi", "li"),
) -> list[dict]:
    """Mask observed prices, re-impute with each method, score on the
    hidden entries.  Returns one record per (method, p, rep)."""
    truth = np.zeros((panel.n_assets, panel.grid.n_points))
    for i, s in enumerate(panel.series):
        truth[i, s.obs_idx] = s.log_price
    rows = []
    for p_idx, p in enumerate(mask_probs):
        for rep in range(repetitions):
            mask_seed = int(
                np.random.SeedSequence(entropy=seed, spawn_key=(p_idx, rep)).generate_state(1)[0]
            )
            mask = generate_mask(panel, p, mask_seed)
            masked = apply_mask(panel, mask)
            for method in methods:
                if method == "nn":
                    res = synchronize(masked, solver_config)
                    prices = reconstruct_prices(res.delta_hat, masked)
                elif method == "pi":
                    prices = previous_tick(masked)
                elif method == "li":
                    prices = linear_interp(masked)
                else:
                    raise ConfigError(f"imputation study does not support {method!r}")
                rows.append(
                    {
                        "method": method,
                        "mask_p": p,
                        "rep": rep,
                        "abs_error": imputation_error(prices, truth, mask, "absolute"),
                        "rel_error": imputation_error(prices, truth, mask, "relative"),
                    }
                )
    return rows


def near_isometry_stat(output: DgpOutput) -> float:
    """|| A(delta) ||^2 vs ||delta||^2 relative gap on the true increments."""
    sys = build_system(output.panel)
    num = float(np.sum(apply_A(sys, output.delta_true) ** 2))
    den = float(np.sum(output.delta_true**2))
    return abs(num - den) / den
