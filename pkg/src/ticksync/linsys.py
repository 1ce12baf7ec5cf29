"""Duration linear system mapping latent increments to observed price changes.

Each consecutive pair of observations of an asset contributes one row:
the sum of the latent per-cell increments across the duration equals the
observed log-price change.  Rows are stored as half-open index ranges
``(lo, hi]`` (never as a dense matrix) and, stacked across assets, they
form a block-diagonal 0/1 operator whose Gram matrix in the row space is
diagonal, which makes the ridge solve exact and linear-time.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import LinearSystemError
from .panel import ObservationPanel

__all__ = [
    "DurationSystem",
    "build_system",
    "apply_A",
    "apply_At",
    "solve_ridge",
    "dense_operator",
    "export_system_csv",
]


@dataclass(frozen=True)
class DurationSystem:
    """Stacked duration rows: per row an asset, a range ``(lo, hi]`` and
    the observed increment ``b`` across it.

    Within an asset the ranges are disjoint, contiguous and start at 0;
    increments past an asset's last observation carry no row and are
    determined only by the penalties.
    """

    n_assets: int
    n_increments: int
    row_asset: np.ndarray  # (n*,) asset index per row
    row_lo: np.ndarray     # (n*,) range start, exclusive
    row_hi: np.ndarray     # (n*,) range end, inclusive
    b: np.ndarray          # (n*,) observed increments

    def __post_init__(self):
        for name in ("row_asset", "row_lo", "row_hi", "b"):
            arr = getattr(self, name)
            arr.setflags(write=False)

    @property
    def n_rows(self) -> int:
        return int(self.b.size)

    @property
    def row_lengths(self) -> np.ndarray:
        """Duration lengths = the diagonal of A A'."""
        return self.row_hi - self.row_lo


def build_system(panel: ObservationPanel) -> DurationSystem:
    """Assemble duration rows and the observed increment vector from a panel."""
    row_asset, row_lo, row_hi, b = [], [], [], []
    for i, s in enumerate(panel.series):
        if len(s) < 2:
            raise LinearSystemError(
                f"{s.asset_id}: need at least 2 observations to form a duration"
            )
        row_asset.append(np.full(len(s) - 1, i, dtype=np.int64))
        row_lo.append(s.obs_idx[:-1])
        row_hi.append(s.obs_idx[1:])
        b.append(np.diff(s.log_price))
    return DurationSystem(
        n_assets=panel.n_assets,
        n_increments=panel.grid.count,
        row_asset=np.concatenate(row_asset),
        row_lo=np.concatenate(row_lo).astype(np.int64),
        row_hi=np.concatenate(row_hi).astype(np.int64),
        b=np.concatenate(b),
    )


def apply_A(sys: DurationSystem, delta: np.ndarray) -> np.ndarray:
    """Sum each row's range of increments: row r -> sum_j delta[asset_r, lo_r:hi_r]."""
    delta = np.asarray(delta)
    if delta.shape != (sys.n_assets, sys.n_increments):
        raise LinearSystemError(
            f"expected shape {(sys.n_assets, sys.n_increments)}, got {delta.shape}"
        )
    cum = np.concatenate(
        [np.zeros((sys.n_assets, 1)), np.cumsum(delta, axis=1)], axis=1
    )
    return cum[sys.row_asset, sys.row_hi] - cum[sys.row_asset, sys.row_lo]


def apply_At(sys: DurationSystem, v: np.ndarray) -> np.ndarray:
    """Adjoint: spread each row's value over its range of increments."""
    v = np.asarray(v)
    if v.shape != (sys.n_rows,):
        raise LinearSystemError(f"expected vector of length {sys.n_rows}, got {v.shape}")
    acc = np.zeros((sys.n_assets, sys.n_increments + 1))
    np.add.at(acc, (sys.row_asset, sys.row_lo), v)
    np.subtract.at(acc, (sys.row_asset, sys.row_hi), v)
    return np.cumsum(acc, axis=1)[:, :-1]


def solve_ridge(sys: DurationSystem, w: np.ndarray, eta: float) -> np.ndarray:
    """Solve the ridge system (A'A + eta I) x = A'b + eta vec(W') exactly.

    Uses the Woodbury identity
    ``(A'A + eta I)^-1 = I/eta - A'(I + AA'/eta)^-1 A / eta^2``
    where ``AA'`` is diagonal with the duration lengths, so the whole
    solve costs O(N n + n*).  Returns the solution as an (N, n) matrix.
    """
    if eta <= 0:
        raise LinearSystemError(f"eta must be positive, got {eta}")
    r = apply_At(sys, sys.b) + eta * np.asarray(w)
    t = apply_A(sys, r) / (eta + sys.row_lengths)
    return (r - apply_At(sys, t)) / eta


def dense_operator(sys: DurationSystem) -> np.ndarray:
    """Materialize A as a dense (n*, N*n) matrix.  Test oracle only."""
    A = np.zeros((sys.n_rows, sys.n_assets * sys.n_increments))
    for r in range(sys.n_rows):
        i = sys.row_asset[r]
        A[r, i * sys.n_increments + sys.row_lo[r] : i * sys.n_increments + sys.row_hi[r]] = 1.0
    return A


def export_system_csv(sys: DurationSystem, path: str | Path, asset_ids: list[str] | None = None) -> None:
    """Debug dump: one row per duration as asset,row,lo,hi,b."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["asset", "row", "lo", "hi", "b"])
        for r in range(sys.n_rows):
            a = sys.row_asset[r]
            label = asset_ids[a] if asset_ids is not None else str(a)
            w.writerow([label, r, int(sys.row_lo[r]), int(sys.row_hi[r]), format(sys.b[r], ".17g")])
