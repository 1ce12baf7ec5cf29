"""Scaled ADMM recovery of the latent increment matrix and its low-rank part.

The estimator splits the increment matrix into a full version (pinned to
the observed duration increments) and a low-rank systematic component
(penalized through its nuclear norm), with auxiliary copies and scaled
dual variables enforcing consensus.  All six updates have closed forms;
the ridge subproblem is solved exactly through the duration system's
Woodbury identity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .linsys import DurationSystem, apply_A, build_system, solve_ridge
from .panel import ObservationPanel
from .baselines import previous_tick

__all__ = [
    "SolverConfig",
    "AdmmState",
    "SyncResult",
    "shrink",
    "admm_step",
    "convergence_ratios",
    "converged",
    "initial_state",
    "synchronize",
    "synchronize_system",
    "debias",
    "reconstruct_prices",
    "augmented_lagrangian",
    "objective",
]


@dataclass(frozen=True)
class SolverConfig:
    """Penalties and stopping rule for the ADMM solve.

    mu couples the full and low-rank estimates, lam weights the nuclear
    norm, eta is the consensus penalty.  Iteration stops when all four
    relative-change/consensus ratios drop below tol.
    """

    mu: float = 0.1
    lam: float = 0.001
    eta: float = 0.01
    tol: float = 1e-5
    max_iter: int = 500
    init_rank: int = 3

    def __post_init__(self):
        if self.mu < 0 or self.lam < 0:
            raise ConfigError("mu and lam must be nonnegative")
        if self.eta <= 0:
            raise ConfigError("eta must be positive")
        if self.tol <= 0:
            raise ConfigError("tol must be positive")
        if self.max_iter < 1:
            raise ConfigError("max_iter must be at least 1")
        if self.init_rank < 1:
            raise ConfigError("init_rank must be at least 1")


@dataclass(frozen=True)
class AdmmState:
    """The six iterates of the splitting scheme at step ``iter``."""

    delta: np.ndarray
    pi: np.ndarray
    z_delta: np.ndarray
    z_pi: np.ndarray
    u_delta: np.ndarray
    u_pi: np.ndarray
    iter: int = 0


@dataclass(frozen=True)
class SyncResult:
    delta_hat: np.ndarray
    pi_hat: np.ndarray
    iterations: int
    converged: bool
    final_residuals: np.ndarray  # the four convergence ratios


def shrink(m: np.ndarray, psi: float) -> np.ndarray:
    """Soft-threshold the singular values of ``m`` by ``psi``."""
    if psi < 0:
        raise ConfigError(f"shrink threshold must be nonnegative, got {psi}")
    u, s, vt = np.linalg.svd(np.asarray(m, dtype=np.float64), full_matrices=False)
    return (u * np.maximum(s - psi, 0.0)) @ vt


def admm_step(state: AdmmState, sys: DurationSystem, config: SolverConfig) -> AdmmState:
    """One sweep of the six closed-form updates, in their fixed order."""
    mu, lam, eta = config.mu, config.lam, config.eta
    delta = solve_ridge(sys, state.z_delta + state.u_delta, eta)
    pi = (mu * state.z_delta + eta * state.z_pi + eta * state.u_pi) / (mu + eta)
    z_delta = (mu * pi + eta * delta - eta * state.u_delta) / (mu + eta)
    z_pi = shrink(pi - state.u_pi, lam / eta)
    u_delta = state.u_delta + z_delta - delta
    u_pi = state.u_pi + z_pi - pi
    return AdmmState(delta, pi, z_delta, z_pi, u_delta, u_pi, state.iter + 1)


def _ratio(diff: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    return float(np.linalg.norm(diff) / max(1.0, na, nb))


def convergence_ratios(prev: AdmmState, cur: AdmmState) -> np.ndarray:
    """The four stopping ratios: step changes of both primals and the
    primal/auxiliary consensus gaps of the previous state."""
    return np.array(
        [
            _ratio(cur.delta - prev.delta, prev.delta, cur.delta),
            _ratio(cur.pi - prev.pi, prev.pi, cur.pi),
            _ratio(prev.delta - prev.z_delta, prev.delta, prev.z_delta),
            _ratio(prev.pi - prev.z_pi, prev.pi, prev.z_pi),
        ]
    )


def converged(prev: AdmmState, cur: AdmmState, tol: float) -> bool:
    return bool(np.max(convergence_ratios(prev, cur)) < tol)


def _rank_r_approx(m: np.ndarray, r: int) -> np.ndarray:
    u, s, vt = np.linalg.svd(m, full_matrices=False)
    r = min(r, s.size)
    return (u[:, :r] * s[:r]) @ vt[:r]


def initial_state(panel: ObservationPanel, config: SolverConfig) -> AdmmState:
    """Warm start: previous-tick fill the prices, difference them, and
    take the leading principal components as the low-rank guess."""
    filled = previous_tick(panel)
    z_delta = np.diff(filled, axis=1)
    pi0 = _rank_r_approx(z_delta, config.init_rank)
    zeros = np.zeros_like(z_delta)
    return AdmmState(
        delta=z_delta.copy(),
        pi=pi0,
        z_delta=z_delta,
        z_pi=pi0.copy(),
        u_delta=zeros,
        u_pi=zeros.copy(),
        iter=0,
    )


def synchronize_system(
    sys: DurationSystem, state: AdmmState, config: SolverConfig
) -> SyncResult:
    """Iterate to convergence from a given state (shared solve loop)."""
    ratios = np.full(4, np.inf)
    ok = False
    for _ in range(config.max_iter):
        nxt = admm_step(state, sys, config)
        ratios = convergence_ratios(state, nxt)
        state = nxt
        if np.max(ratios) < config.tol:
            ok = True
            break
    return SyncResult(
        delta_hat=state.delta,
        pi_hat=state.pi,
        iterations=state.iter,
        converged=ok,
        final_residuals=ratios,
    )


def synchronize(panel: ObservationPanel, config: SolverConfig = SolverConfig()) -> SyncResult:
    """Recover (delta_hat, pi_hat) from an asynchronous panel.

    Non-convergence within ``max_iter`` is reported through the result
    flag, not raised, so batch callers can keep going.
    """
    sys = build_system(panel)
    return synchronize_system(sys, initial_state(panel, config), config)


def debias(
    delta_hat: np.ndarray,
    pi_hat: np.ndarray,
    config: SolverConfig,
    k: int | None = None,
    j: int | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Undo the known singular-value shrinkage of the two estimates.

    delta: add lam back to the first k singular values and scale the
    rest by (1 + mu).  pi: add lam (1 + 1/mu) back to the first j
    singular values (needs mu > 0 when j > 0).  When not given, k and j
    count the singular values exceeding the respective thresholds.
    """
    lam, mu = config.lam, config.mu
    ud, sd, vdt = np.linalg.svd(np.asarray(delta_hat), full_matrices=False)
    if k is None:
        k = int(np.sum(sd > lam))
    if not 0 <= k <= sd.size:
        raise ConfigError(f"k must be in [0, {sd.size}], got {k}")
    sd_new = sd * (1.0 + mu)
    sd_new[:k] = sd[:k] + lam
    delta_tilde = (ud * sd_new) @ vdt

    up, sp, vpt = np.linalg.svd(np.asarray(pi_hat), full_matrices=False)
    if j is None:
        j = int(np.sum(sp > lam * (1.0 + 1.0 / mu))) if mu > 0 else 0
    if not 0 <= j <= sp.size:
        raise ConfigError(f"j must be in [0, {sp.size}], got {j}")
    if j > 0 and mu == 0:
        raise ConfigError("pi de-bias needs mu > 0 (the correction adds lam (1 + 1/mu))")
    sp_new = sp.copy()
    if j > 0:
        sp_new[:j] = sp[:j] + lam * (1.0 + 1.0 / mu)
    pi_tilde = (up * sp_new) @ vpt
    return delta_tilde, pi_tilde


def reconstruct_prices(delta_hat: np.ndarray, panel: ObservationPanel) -> np.ndarray:
    """Anchor each asset at its first log price and cumulate increments."""
    anchors = np.array([s.log_price[0] for s in panel.series])
    n = delta_hat.shape[1]
    out = np.empty((panel.n_assets, n + 1))
    out[:, 0] = anchors
    out[:, 1:] = anchors[:, None] + np.cumsum(delta_hat, axis=1)
    return out


def objective(state: AdmmState, sys: DurationSystem, config: SolverConfig) -> float:
    """Relaxed objective: data fit + coupling + nuclear penalty."""
    fit = 0.5 * np.sum((apply_A(sys, state.delta) - sys.b) ** 2)
    couple = 0.5 * config.mu * np.sum((state.z_delta - state.pi) ** 2)
    nuc = config.lam * np.sum(np.linalg.svd(state.z_pi, compute_uv=False))
    return float(fit + couple + nuc)


def augmented_lagrangian(state: AdmmState, sys: DurationSystem, config: SolverConfig) -> float:
    """Objective plus the two scaled consensus penalty terms."""
    eta = config.eta
    pen_d = 0.5 * eta * np.sum((state.z_delta - state.delta + state.u_delta) ** 2)
    pen_p = 0.5 * eta * np.sum((state.z_pi - state.pi + state.u_pi) ** 2)
    return objective(state, sys, config) + float(pen_d + pen_p)
