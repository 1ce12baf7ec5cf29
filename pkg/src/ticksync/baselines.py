"""Reference synchronization schemes: previous-tick and linear-interpolation
fills, refresh-time subsampling, and block pre-averaging."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import PanelError
from .panel import ObservationPanel

__all__ = [
    "previous_tick",
    "linear_interp",
    "refresh_time",
    "pre_average",
    "SubsampledPanel",
]


@dataclass(frozen=True)
class SubsampledPanel:
    """Prices sampled on a coarser set of grid indices (refresh grid)."""

    grid_indices: np.ndarray  # (K+1,) increasing, starts at 0
    log_prices: np.ndarray    # (N, K+1)
    asset_ids: tuple[str, ...]

    def returns(self) -> np.ndarray:
        return np.diff(self.log_prices, axis=1)


def previous_tick(panel: ObservationPanel) -> np.ndarray:
    """Fill each missing cell with the most recent observed log price."""
    n_pts = panel.grid.n_points
    out = np.empty((panel.n_assets, n_pts))
    for i, s in enumerate(panel.series):
        # cell j takes the last observation at or before j
        pos = np.searchsorted(s.obs_idx, np.arange(n_pts), side="right") - 1
        out[i] = s.log_price[pos]
    return out


def linear_interp(panel: ObservationPanel) -> np.ndarray:
    """Interpolate linearly between observations; carry the last one forward."""
    n_pts = panel.grid.n_points
    grid = np.arange(n_pts)
    out = np.empty((panel.n_assets, n_pts))
    for i, s in enumerate(panel.series):
        out[i] = np.interp(grid, s.obs_idx, s.log_price)
    return out


def refresh_time(panel: ObservationPanel) -> SubsampledPanel:
    """Subsample to the times by which every asset has traded again.

    The first refresh index is the largest first post-anchor observation
    across assets; each next one is the largest first observation past
    the previous refresh.  Prices at refresh indices are previous-tick.
    """
    obs = [s.obs_idx for s in panel.series]
    refresh = [0]
    v = 0
    while True:
        nxt = 0
        for idx in obs:
            pos = np.searchsorted(idx, v, side="right")
            if pos == idx.size:
                nxt = -1  # some asset never trades again
                break
            nxt = max(nxt, int(idx[pos]))
        if nxt < 0:
            break
        refresh.append(nxt)
        v = nxt
    indices = np.array(refresh, dtype=np.int64)
    filled = previous_tick(panel)
    return SubsampledPanel(indices, filled[:, indices], tuple(panel.asset_ids))


def pre_average(panel: ObservationPanel, block: int) -> np.ndarray:
    """Block-average observed prices and difference the block means.

    The grid's cells are cut into consecutive blocks of ``block`` cells
    (the last block may be short); a block with no observation borrows
    the previous block's mean.  Returns the (N, n_blocks - 1) matrix of
    first differences of block means.
    """
    if block < 1:
        raise PanelError(f"block length must be >= 1, got {block}")
    n_pts = panel.grid.n_points
    n_blocks = int(np.ceil(n_pts / block))
    means = np.empty((panel.n_assets, n_blocks))
    for i, s in enumerate(panel.series):
        blk = s.obs_idx // block
        sums = np.bincount(blk, weights=s.log_price, minlength=n_blocks)
        counts = np.bincount(blk, minlength=n_blocks)
        last = np.nan
        for g in range(n_blocks):
            if counts[g] > 0:
                last = sums[g] / counts[g]
            means[i, g] = last  # anchor guarantees block 0 is observed
    return np.diff(means, axis=1)
