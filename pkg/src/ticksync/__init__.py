"""ticksync: synchronize asynchronous high-frequency price panels.

Recovers the latent grid-aligned increment matrix and its low-rank
systematic component from irregularly observed prices by nuclear-norm
penalized completion under duration constraints, and evaluates the
recovery against standard fill/subsample baselines on covariance and
portfolio tasks.
"""

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    LinearSystemError,
    PanelError,
    ParseError,
    TickSyncError,
)
from .panel import (
    GridSpec,
    MaskMatrix,
    ObservationPanel,
    TickSeries,
    align_to_grid,
    apply_mask,
    generate_mask,
    read_panel,
    split_days,
    write_panel,
)
from .linsys import DurationSystem, apply_A, apply_At, build_system, solve_ridge
from .solver import (
    AdmmState,
    SolverConfig,
    SyncResult,
    admm_step,
    converged,
    debias,
    reconstruct_prices,
    shrink,
    synchronize,
)
from .baselines import linear_interp, pre_average, previous_tick, refresh_time
from .simulate import DgpConfig, DgpOutput, sample_poisson_times, simulate
from .tuning import TuningGrid, TuningResult, imputation_error, select_parameters
from .estimators import (
    CovarianceEstimate,
    bipower_variation,
    eigen_by_group,
    pca_factor_cov,
    realized_cov,
    spot_beta,
    truncate_jumps,
)
from .evalmetrics import cov_error, increment_error_l1
from .portfolio import BacktestResult, PortfolioConfig, backtest, min_variance_weights

__all__ = [
    "__version__",
    "TickSyncError", "PanelError", "ParseError", "LinearSystemError", "ConfigError",
    "GridSpec", "TickSeries", "ObservationPanel", "MaskMatrix",
    "align_to_grid", "generate_mask", "apply_mask", "split_days",
    "read_panel", "write_panel",
    "DurationSystem", "build_system", "apply_A", "apply_At", "solve_ridge",
    "SolverConfig", "AdmmState", "SyncResult",
    "shrink", "admm_step", "converged", "synchronize", "debias", "reconstruct_prices",
    "previous_tick", "linear_interp", "refresh_time", "pre_average",
    "DgpConfig", "DgpOutput", "simulate", "sample_poisson_times",
    "TuningGrid", "TuningResult", "imputation_error", "select_parameters",
    "CovarianceEstimate", "realized_cov", "pca_factor_cov", "eigen_by_group",
    "bipower_variation", "truncate_jumps", "spot_beta",
    "increment_error_l1", "cov_error",
    "PortfolioConfig", "BacktestResult", "min_variance_weights", "backtest",
]
