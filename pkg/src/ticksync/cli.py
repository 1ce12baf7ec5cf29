"""Command-line front end.

Subcommands cover the full pipeline: DGP simulation, synchronization,
penalty tuning, metric evaluation, eigenvalue and beta reports, the
portfolio backtest, and the end-to-end Monte Carlo harness.  Every run
writes a key=value manifest next to its outputs listing the effective
configuration, the seed, library versions, and every file produced.
Report paths write delimited tables plus a rendered figure (disable
with --no-figures).

Exit codes: 0 success, 1 usage, 2 I/O failure, 3 invalid data.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .baselines import linear_interp, pre_average, previous_tick, refresh_time
from .errors import ConfigError, TickSyncError
from .estimators import eigen_by_group, group_by_missingness, pca_factor_cov, spot_beta
from .evalmetrics import COV_NORMS, cov_error, increment_error_l1
from .experiments import (
    METHODS,
    SCENARIOS,
    default_block,
    imputation_study,
    run_scenario,
    scenario_config,
    summarize,
)
from .linsys import build_system, export_system_csv
from .panel import (
    ObservationPanel,
    read_panel,
    read_sidecar,
    split_days,
    write_panel,
)
from .portfolio import PortfolioConfig, backtest
from .reports import read_matrix_csv, write_manifest, write_matrix_csv, write_rows_csv
from .simulate import DgpConfig, simulate
from .solver import SolverConfig, reconstruct_prices, synchronize
from .tuning import ETA_OVER_LAMBDA, TuningGrid, select_parameters

__all__ = ["main"]


class _Parser(argparse.ArgumentParser):
    # usage problems exit 1 (argparse default is 2, reserved here for I/O)
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _float_list(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in text.split(",") if x)


def _str_list(text: str) -> tuple[str, ...]:
    return tuple(x for x in text.split(",") if x)


def _add_solver_flags(p: argparse.ArgumentParser):
    g = p.add_argument_group("solver")
    g.add_argument("--mu", type=float, default=0.1)
    g.add_argument("--lam", type=float, default=0.001)
    g.add_argument("--eta", type=float, default=0.01)
    g.add_argument("--tol", type=float, default=1e-5)
    g.add_argument("--max-iter", type=int, default=500)
    g.add_argument("--rank", type=int, default=3, help="factor rank for init and covariance")


def _add_common_flags(p: argparse.ArgumentParser):
    p.add_argument("--outdir", required=True, help="directory for outputs (created)")
    p.add_argument("--no-figures", action="store_true", help="skip figure rendering")
    p.add_argument("--config", help="key=value file supplying flag defaults")


def _solver_config(args) -> SolverConfig:
    return SolverConfig(
        mu=args.mu, lam=args.lam, eta=args.eta, tol=args.tol,
        max_iter=args.max_iter, init_rank=args.rank,
    )


def _outdir(args) -> Path:
    out = Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _manifest(out: Path, args, outputs: dict[str, str], extra: dict | None = None) -> None:
    entries = {
        "command": args.command,
        "version": __version__,
        "numpy_version": np.__version__,
        "scipy_version": scipy.__version__,
    }
    skip = {"func", "command", "no_figures", "config"}
    for key, val in sorted(vars(args).items()):
        if key in skip or val is None:
            continue
        entries[f"config.{key}"] = val
    if extra:
        entries.update(extra)
    for name, fname in outputs.items():
        entries[f"output.{name}"] = fname
    write_manifest(out / "manifest.txt", entries)


def _day_length(args, panel: ObservationPanel) -> int:
    if getattr(args, "day_length", None):
        return args.day_length
    try:
        meta = read_sidecar(args.panel)
        if "day_increments" in meta:
            return int(meta["day_increments"])
    except FileNotFoundError:
        pass
    return panel.grid.count


def _sync_returns(panel: ObservationPanel, method: str, config: SolverConfig, day_len: int):
    """Per-method synchronized returns plus optional extras dict."""
    if method == "nn":
        deltas, pis, iters = [], [], 0
        ok = True
        for day in split_days(panel, day_len):
            res = synchronize(day, config)
            deltas.append(res.delta_hat)
            pis.append(res.pi_hat)
            ok &= res.converged
            iters += res.iterations
        return np.hstack(deltas), {"pi_hat": np.hstack(pis), "converged": ok, "iterations": iters}
    if method == "pi":
        return np.diff(previous_tick(panel), axis=1), {}
    if method == "li":
        return np.diff(linear_interp(panel), axis=1), {}
    if method == "rt":
        subs = [refresh_time(day) for day in split_days(panel, day_len)]
        rets = np.hstack([s.returns() for s in subs])
        return rets, {"refresh": subs}
    if method == "pa":
        block = default_block(day_len)
        rets = np.hstack([pre_average(day, block) for day in split_days(panel, day_len)])
        return rets, {"block": block}
    raise ConfigError(f"unknown method {method!r}; available: {METHODS}")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def _cmd_simulate(args) -> int:
    out = _outdir(args)
    if args.scenario:
        cfg = scenario_config(args.scenario, seed=args.seed)
    else:
        cfg = DgpConfig(
            n_assets=args.n_assets,
            days=args.days,
            steps_per_day=args.steps_per_day,
            dt=1.0 / args.steps_per_day,
            factor_strength=args.alpha,
            noise_scale=args.noise_scale,
            arrival_intensities=args.intensities,
            seed=args.seed,
        )
    res = simulate(cfg)
    ids = res.panel.asset_ids
    write_panel(out / "panel.csv", res.panel, {"day_increments": str(cfg.steps_per_day)})
    write_matrix_csv(out / "delta_true.csv", res.delta_true, ids)
    write_matrix_csv(out / "pi_true.csv", res.pi_true, ids)
    write_matrix_csv(out / "sigma_true.csv", res.sigma_true, ids)
    write_matrix_csv(
        out / "factor_paths.csv", res.factor_paths,
        [f"F{k}" for k in range(res.factor_paths.shape[0])],
    )
    export_system_csv(build_system(res.panel), out / "system.csv", ids)
    outputs = {
        "panel": "panel.csv", "panel_meta": "panel.meta",
        "delta_true": "delta_true.csv", "pi_true": "pi_true.csv",
        "sigma_true": "sigma_true.csv", "factor_paths": "factor_paths.csv",
        "system": "system.csv",
    }
    _manifest(out, args, outputs, {"feller_satisfied": cfg.feller_satisfied()})
    return 0


def _cmd_sync(args) -> int:
    out = _outdir(args)
    panel = read_panel(args.panel)
    day_len = _day_length(args, panel)
    config = _solver_config(args)
    rets, extras = _sync_returns(panel, args.method, config, day_len)
    ids = panel.asset_ids
    outputs = {}
    tag = args.method
    write_matrix_csv(out / f"{tag}_returns.csv", rets, ids)
    outputs["returns"] = f"{tag}_returns.csv"
    manifest_extra: dict = {"method": args.method, "day_length": day_len}
    if args.method == "nn":
        write_matrix_csv(out / "nn_pi_hat.csv", extras["pi_hat"], ids)
        prices = reconstruct_prices(rets, panel)
        write_matrix_csv(out / "nn_prices.csv", prices, ids)
        outputs["pi_hat"] = "nn_pi_hat.csv"
        outputs["prices"] = "nn_prices.csv"
        manifest_extra["converged"] = extras["converged"]
        manifest_extra["iterations"] = extras["iterations"]
    elif args.method in ("pi", "li"):
        fill = previous_tick(panel) if args.method == "pi" else linear_interp(panel)
        write_matrix_csv(out / f"{tag}_prices.csv", fill, ids)
        outputs["prices"] = f"{tag}_prices.csv"
    elif args.method == "rt":
        grids = np.hstack([s.grid_indices for s in extras["refresh"]])
        write_rows_csv(out / "rt_grid.csv", ["grid_index"], [{"grid_index": int(g)} for g in grids])
        outputs["refresh_grid"] = "rt_grid.csv"
    elif args.method == "pa":
        manifest_extra["block"] = extras["block"]
    _manifest(out, args, outputs, manifest_extra)
    return 0


def _cmd_tune(args) -> int:
    out = _outdir(args)
    panel = read_panel(args.panel)
    grid = TuningGrid(
        mu_candidates=args.mu_grid,
        lambda_candidates=args.lam_grid,
        mask_probs=args.mask_p,
        repetitions=args.reps,
        seed=args.seed,
    )
    result = select_parameters(panel, grid, tol=args.tol, max_iter=args.max_iter, init_rank=args.rank)
    fields = ["mu", "lambda", "eta", "mask_p", "rep", "abs_error", "rel_error"]
    rows = [
        {
            "mu": r.mu, "lambda": r.lam, "eta": r.eta, "mask_p": r.mask_p,
            "rep": r.rep, "abs_error": r.abs_error, "rel_error": r.rel_error,
        }
        for r in result.records
    ]
    write_rows_csv(out / "tuning_report.csv", fields, rows)
    outputs = {"report": "tuning_report.csv"}
    eta_records = None
    if args.eta_study:
        eta_records = _eta_study(panel, result, args)
        write_rows_csv(
            out / "eta_study.csv", fields,
            [
                {
                    "mu": r.mu, "lambda": r.lam, "eta": r.eta, "mask_p": r.mask_p,
                    "rep": r.rep, "abs_error": r.abs_error, "rel_error": r.rel_error,
                }
                for r in eta_records
            ],
        )
        outputs["eta_study"] = "eta_study.csv"
    if not args.no_figures:
        from .figures import save_tuning_curves

        save_tuning_curves(out / "tuning_curves.png", result.records, eta_records)
        outputs["figure"] = "tuning_curves.png"
    _manifest(
        out, args, outputs,
        {"selected.mu": result.mu, "selected.lambda": result.lam, "selected.eta": result.eta},
    )
    return 0


def _eta_study(panel, result, args):
    """Re-score the selected (mu, lambda) across an eta sweep."""
    from .panel import apply_mask, generate_mask
    from .tuning import TuningRecord, imputation_error, _mask_seed, _observed_price_matrix

    truth = _observed_price_matrix(panel)
    records = []
    for eta in args.eta_grid:
        config = SolverConfig(
            mu=result.mu, lam=result.lam, eta=eta,
            tol=args.tol, max_iter=args.max_iter, init_rank=args.rank,
        )
        for p_idx, p in enumerate(args.mask_p):
            for rep in range(args.reps):
                mask = generate_mask(panel, p, _mask_seed(args.seed, p_idx, rep))
                masked = apply_mask(panel, mask)
                res = synchronize(masked, config)
                prices = reconstruct_prices(res.delta_hat, masked)
                records.append(
                    TuningRecord(
                        result.mu, result.lam, eta, p, rep,
                        imputation_error(prices, truth, mask, "absolute"),
                        imputation_error(prices, truth, mask, "relative"),
                    )
                )
    return records


def _cmd_evaluate(args) -> int:
    out = _outdir(args)
    truth_dir = Path(args.truth_dir)
    returns, _ = read_matrix_csv(args.returns)
    sigma_true, _ = read_matrix_csv(truth_dir / "sigma_true.csv")
    pi_true, _ = read_matrix_csv(truth_dir / "pi_true.csv")
    rank = min(args.rank, returns.shape[0] - 1)
    sigma_hat = pca_factor_cov(returns, rank).sigma
    rows = [
        {
            "scenario": args.label, "method": args.label,
            "metric": f"cov_{norm}", "mean": cov_error(sigma_hat, sigma_true, norm), "sd": 0.0,
        }
        for norm in COV_NORMS
    ]
    inc_path = args.increments or args.returns
    increments, _ = read_matrix_csv(inc_path)
    if increments.shape == pi_true.shape:
        rows.append(
            {
                "scenario": args.label, "method": args.label,
                "metric": "increment_l1",
                "mean": increment_error_l1(increments, pi_true), "sd": 0.0,
            }
        )
    write_rows_csv(out / "metrics.csv", ["scenario", "method", "metric", "mean", "sd"], rows)
    outputs = {"metrics": "metrics.csv"}
    if not args.no_figures:
        from .figures import save_method_bars

        save_method_bars(out / "metrics.png", rows, "cov_frobenius", args.label)
        outputs["figure"] = "metrics.png"
    _manifest(out, args, outputs)
    return 0


def _cmd_eigen(args) -> int:
    out = _outdir(args)
    panel = read_panel(args.panel)
    day_len = _day_length(args, panel)
    config = _solver_config(args)
    freq = args.frequency_label or f"{panel.grid.step:g}s"
    groups = group_by_missingness(panel, args.groups)
    rows = []
    for method in args.methods:
        rets, _ = _sync_returns(panel, method, config, day_len)
        shares = eigen_by_group(rets, groups, args.k)
        for g in range(len(groups)):
            for rank in range(args.k):
                rows.append(
                    {
                        "group": g, "method": method, "frequency": freq,
                        "eig_rank": rank + 1, "value": shares[g, rank],
                    }
                )
    write_rows_csv(out / "eigen_report.csv", ["group", "method", "frequency", "eig_rank", "value"], rows)
    outputs = {"report": "eigen_report.csv"}
    if not args.no_figures:
        from .figures import save_eigen_shares

        save_eigen_shares(out / "eigen_report.png", rows)
        outputs["figure"] = "eigen_report.png"
    _manifest(out, args, outputs)
    return 0


def _cmd_portfolio(args) -> int:
    out = _outdir(args)
    panel = read_panel(args.panel)
    day_len = _day_length(args, panel)
    period_len = day_len * args.rebalance_days
    config = _solver_config(args)
    pconfig = PortfolioConfig(
        gross_exposure=args.c,
        rebalance_days=args.rebalance_days,
        factor_rank=args.rank,
        truncate_multiplier=args.truncate if args.truncate > 0 else None,
    )
    groups = (
        group_by_missingness(panel, args.group_count)
        if args.group_count > 1
        else [np.arange(panel.n_assets)]
    )
    rows = []
    for g, members in enumerate(groups):
        sub = ObservationPanel(panel.grid, tuple(panel.series[i] for i in members))
        periods = split_days(sub, period_len)
        for method in args.methods:
            sync = lambda p, m=method: _sync_returns(p, m, config, day_len)[0]
            res = backtest(periods, sync, pconfig)
            rows.append(
                {
                    "group": g, "method": method, "c": args.c,
                    "AR": res.annual_return, "SD": res.annual_std,
                    "SR": res.sharpe if res.sharpe is not None else "",
                }
            )
    write_rows_csv(out / "backtest.csv", ["group", "method", "c", "AR", "SD", "SR"], rows)
    outputs = {"report": "backtest.csv"}
    if not args.no_figures:
        from .figures import save_backtest_bars

        save_backtest_bars(out / "backtest.png", rows)
        outputs["figure"] = "backtest.png"
    _manifest(out, args, outputs)
    return 0


def _cmd_beta(args) -> int:
    out = _outdir(args)
    panel = read_panel(args.panel)
    day_len = _day_length(args, panel)
    config = _solver_config(args)
    if args.market not in panel.asset_ids:
        raise ConfigError(f"market asset {args.market!r} not in panel")
    rets, _ = _sync_returns(panel, args.method, config, day_len)
    ids = panel.asset_ids
    market = rets[ids.index(args.market)]
    targets = args.assets or tuple(a for a in ids if a != args.market)
    rows = []
    paths = {}
    for asset in targets:
        if asset not in ids:
            raise ConfigError(f"asset {asset!r} not in panel")
        beta = spot_beta(rets[ids.index(asset)], market, args.window)
        paths[asset] = beta
        rows.extend(
            {"asset": asset, "t_index": t, "beta": b} for t, b in enumerate(beta)
        )
    write_rows_csv(out / "beta.csv", ["asset", "t_index", "beta"], rows)
    outputs = {"report": "beta.csv"}
    if not args.no_figures:
        from .figures import save_beta_paths

        save_beta_paths(out / "beta.png", paths)
        outputs["figure"] = "beta.png"
    _manifest(out, args, outputs, {"method": args.method, "window": args.window})
    return 0


def _cmd_mc(args) -> int:
    out = _outdir(args)
    config = _solver_config(args)
    result = run_scenario(
        args.scenario, args.reps, args.seed,
        solver_config=config, methods=args.methods,
        workers=args.workers, factor_rank=args.rank,
    )
    rows = summarize(result)
    write_rows_csv(out / "summary.csv", ["scenario", "method", "metric", "mean", "sd"], rows)
    write_rows_csv(
        out / "replications.csv", ["rep", "seed"],
        [{"rep": i, "seed": s} for i, s in enumerate(result.seeds)],
    )
    outputs = {"summary": "summary.csv", "replications": "replications.csv"}
    if not args.no_figures:
        from .figures import save_method_bars

        save_method_bars(out / "summary.png", rows, "cov_frobenius", args.scenario)
        outputs["figure"] = "summary.png"
    converged = all(
        rep["nn"].get("converged", 1.0) == 1.0 for rep in result.per_rep if "nn" in rep
    )
    _manifest(out, args, outputs, {"converged": converged})
    return 0


def _cmd_impute(args) -> int:
    out = _outdir(args)
    panel = read_panel(args.panel)
    config = _solver_config(args)
    rows = imputation_study(panel, args.mask_p, args.reps, config, seed=args.seed)
    write_rows_csv(
        out / "imputation.csv",
        ["method", "mask_p", "rep", "abs_error", "rel_error"], rows,
    )
    outputs = {"report": "imputation.csv"}
    if not args.no_figures:
        from .figures import save_imputation_curves

        save_imputation_curves(out / "imputation.png", rows)
        outputs["figure"] = "imputation.png"
    _manifest(out, args, outputs)
    return 0


# ---------------------------------------------------------------------------
# parser assembly
# ---------------------------------------------------------------------------

def _build_parser() -> _Parser:
    parser = _Parser(prog="ticksync", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic panel with ground truth")
    _add_common_flags(p)
    p.add_argument("--scenario", choices=sorted(SCENARIOS), help="named scenario preset")
    p.add_argument("--n-assets", type=int, default=20)
    p.add_argument("--days", type=int, default=1)
    p.add_argument("--steps-per-day", type=int, default=390)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--noise-scale", type=float, default=0.1)
    p.add_argument("--intensities", type=_float_list, default=(1.0,))
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("sync", help="synchronize a panel with one method")
    _add_common_flags(p)
    _add_solver_flags(p)
    p.add_argument("--panel", required=True)
    p.add_argument("--method", choices=METHODS, default="nn")
    p.add_argument("--day-length", type=int, default=0, help="increments per day (0: from sidecar)")
    p.set_defaults(func=_cmd_sync)

    p = sub.add_parser("tune", help="select penalties by artificial masking")
    _add_common_flags(p)
    p.add_argument("--panel", required=True)
    p.add_argument("--mu-grid", type=_float_list, default=(0.05, 0.1, 0.2))
    p.add_argument("--lam-grid", type=_float_list, default=(5e-4, 1e-3, 2e-3))
    p.add_argument("--mask-p", type=_float_list, default=(0.1, 0.3))
    p.add_argument("--reps", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--eta-study", action="store_true", help="also sweep eta at the selected pair")
    p.add_argument("--eta-grid", type=_float_list, default=(0.002, 0.005, 0.01, 0.02, 0.05))
    p.add_argument("--tol", type=float, default=1e-5)
    p.add_argument("--max-iter", type=int, default=500)
    p.add_argument("--rank", type=int, default=3)
    p.set_defaults(func=_cmd_tune)

    p = sub.add_parser("evaluate", help="score synchronized returns against stored truth")
    _add_common_flags(p)
    p.add_argument("--truth-dir", required=True, help="directory written by simulate")
    p.add_argument("--returns", required=True, help="matrix CSV of synchronized returns")
    p.add_argument("--increments", help="matrix CSV scored against the true increments")
    p.add_argument("--label", default="estimate")
    p.add_argument("--rank", type=int, default=3)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("eigen", help="eigenvalue shares by missingness group")
    _add_common_flags(p)
    _add_solver_flags(p)
    p.add_argument("--panel", required=True)
    p.add_argument("--groups", type=int, default=10)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--methods", type=_str_list, default=("nn", "pi"))
    p.add_argument("--frequency-label")
    p.add_argument("--day-length", type=int, default=0)
    p.set_defaults(func=_cmd_eigen)

    p = sub.add_parser("portfolio", help="walk-forward minimum-variance backtest")
    _add_common_flags(p)
    _add_solver_flags(p)
    p.add_argument("--panel", required=True)
    p.add_argument("--methods", type=_str_list, default=("nn", "pi"))
    p.add_argument("--c", type=float, default=2.0, help="gross exposure bound")
    p.add_argument("--rebalance-days", type=int, default=1)
    p.add_argument("--group-count", type=int, default=1)
    p.add_argument("--truncate", type=float, default=0.0, help="jump truncation multiplier (0: off)")
    p.add_argument("--day-length", type=int, default=0)
    p.set_defaults(func=_cmd_portfolio)

    p = sub.add_parser("beta", help="rolling spot betas against a market asset")
    _add_common_flags(p)
    _add_solver_flags(p)
    p.add_argument("--panel", required=True)
    p.add_argument("--market", required=True)
    p.add_argument("--assets", type=_str_list, help="subset of assets (default: all)")
    p.add_argument("--window", type=int, default=15)
    p.add_argument("--method", choices=METHODS, default="nn")
    p.add_argument("--day-length", type=int, default=0)
    p.set_defaults(func=_cmd_beta)

    p = sub.add_parser("mc", help="Monte Carlo reproduction of a scenario")
    _add_common_flags(p)
    _add_solver_flags(p)
    p.add_argument("--scenario", required=True, choices=sorted(SCENARIOS))
    p.add_argument("--reps", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--methods", type=_str_list, default=METHODS)
    p.set_defaults(func=_cmd_mc)

    p = sub.add_parser("impute", help="masking/imputation error study on a panel")
    _add_common_flags(p)
    _add_solver_flags(p)
    p.add_argument("--panel", required=True)
    p.add_argument("--mask-p", type=_float_list, default=(0.1, 0.3, 0.5))
    p.add_argument("--reps", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_impute)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.config:
        try:
            defaults = read_sidecar_like(args.config)
        except OSError as exc:
            print(f"ticksync: cannot read config: {exc}", file=sys.stderr)
            return 2
        parser.set_defaults(**defaults)
        try:
            args = parser.parse_args(argv)
        except SystemExit as exc:
            return int(exc.code or 0)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"ticksync: file not found: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"ticksync: I/O error: {exc}", file=sys.stderr)
        return 2
    except TickSyncError as exc:
        print(f"ticksync: {exc}", file=sys.stderr)
        return 3


def read_sidecar_like(path: str) -> dict[str, str]:
    """Flat key=value config file; keys match flag destinations."""
    out: dict[str, str] = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" in line:
                k, v = line.split("=", 1)
                out[k.strip().replace("-", "_")] = v.strip()
    return out


if __name__ == "__main__":
    sys.exit(main())
