"""Error metrics for recovered increments and covariance estimates."""

from __future__ import annotations

import numpy as np

from .errors import ConfigError

__all__ = ["increment_error_l1", "cov_error", "COV_NORMS"]

COV_NORMS = ("frobenius", "spectral", "max")


def increment_error_l1(pi_hat: np.ndarray, pi_true: np.ndarray, floor: float = 1e-12) -> float:
    """Mean elementwise relative error |est - true| / |true|.

    Entries with |true| <= floor are dropped from both the sum and the
    count; if nothing survives the floor the metric is undefined.
    """
    pi_hat = np.asarray(pi_hat)
    pi_true = np.asarray(pi_true)
    if pi_hat.shape != pi_true.shape:
        raise ConfigError(f"shape mismatch {pi_hat.shape} vs {pi_true.shape}")
    keep = np.abs(pi_true) > floor
    if not keep.any():
        raise ConfigError("all reference entries below the floor")
    return float(np.mean(np.abs(pi_hat[keep] - pi_true[keep]) / np.abs(pi_true[keep])))


def cov_error(sigma_hat: np.ndarray, sigma_true: np.ndarray, norm: str = "frobenius") -> float:
    """Relative error ||est - true|| / ||true|| in the chosen matrix norm."""
    sigma_hat = np.asarray(sigma_hat)
    sigma_true = np.asarray(sigma_true)
    if sigma_hat.shape != sigma_true.shape:
        raise ConfigError(f"shape mismatch {sigma_hat.shape} vs {sigma_true.shape}")
    diff = sigma_hat - sigma_true
    if norm == "frobenius":
        num, den = np.linalg.norm(diff), np.linalg.norm(sigma_true)
    elif norm == "spectral":
        num, den = np.linalg.norm(diff, 2), np.linalg.norm(sigma_true, 2)
    elif norm == "max":
        num, den = np.max(np.abs(diff)), np.max(np.abs(sigma_true))
    else:
        raise ConfigError(f"unknown norm {norm!r}; use one of {COV_NORMS}")
    if den == 0:
        raise ConfigError("reference matrix has zero norm")
    return float(num / den)
