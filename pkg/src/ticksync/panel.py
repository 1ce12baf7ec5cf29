"""Observation panels on a shared discrete time grid.

An asset's tick stream is snapped onto a grid of ``count + 1`` points
``t_0 .. t_count``; a grid cell is observed if at least one trade fell
inside it and missing otherwise.  Missingness is kept sparse (index
lists) so that stale prices never leak into downstream computations.
Artificial masks, used by the tuning and imputation-error protocols,
remove a random subset of the observed, non-anchor entries.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import PanelError, ParseError

__all__ = [
    "GridSpec",
    "TickSeries",
    "ObservationPanel",
    "MaskMatrix",
    "align_to_grid",
    "generate_mask",
    "apply_mask",
    "split_days",
    "read_panel",
    "write_panel",
    "read_mask",
    "write_mask",
    "read_sidecar",
    "sidecar_path",
]


@dataclass(frozen=True)
class GridSpec:
    """Shared time grid: ``count`` increments of length ``step`` from ``t0``."""

    t0: float
    step: float
    count: int

    def __post_init__(self):
        if self.step <= 0:
            raise PanelError(f"grid step must be positive, got {self.step}")
        if self.count < 1:
            raise PanelError(f"grid needs at least one increment, got {self.count}")

    @property
    def n_points(self) -> int:
        return self.count + 1

    def t_end(self) -> float:
        return self.t0 + self.step * self.count


@dataclass(frozen=True)
class TickSeries:
    """One asset's observed grid cells and log prices.

    ``obs_idx`` is strictly increasing and starts at 0: every asset has
    an anchor observation at ``t_0`` (backfilled during alignment when
    the first trade arrives later).
    """

    asset_id: str
    obs_idx: np.ndarray
    log_price: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.obs_idx, dtype=np.int64)
        px = np.asarray(self.log_price, dtype=np.float64)
        if idx.size != px.size:
            raise PanelError(f"{self.asset_id}: {idx.size} indices vs {px.size} prices")
        if idx.size == 0:
            raise PanelError(f"{self.asset_id}: empty tick series")
        if idx[0] != 0:
            raise PanelError(f"{self.asset_id}: first observation must anchor grid index 0")
        if idx.size > 1 and not np.all(np.diff(idx) > 0):
            raise PanelError(f"{self.asset_id}: observation indices must be strictly increasing")
        idx.setflags(write=False)
        px.setflags(write=False)
        object.__setattr__(self, "obs_idx", idx)
        object.__setattr__(self, "log_price", px)

    def __len__(self) -> int:
        return int(self.obs_idx.size)


@dataclass(frozen=True)
class ObservationPanel:
    """N tick series sharing one grid.  Immutable after construction."""

    grid: GridSpec
    series: tuple[TickSeries, ...]

    def __post_init__(self):
        series = tuple(self.series)
        if not series:
            raise PanelError("panel needs at least one asset")
        seen = set()
        for s in series:
            if s.asset_id in seen:
                raise PanelError(f"duplicate asset id {s.asset_id!r}")
            seen.add(s.asset_id)
            if s.obs_idx[-1] > self.grid.count:
                raise PanelError(
                    f"{s.asset_id}: index {s.obs_idx[-1]} beyond grid count {self.grid.count}"
                )
        object.__setattr__(self, "series", series)

    @property
    def n_assets(self) -> int:
        return len(self.series)

    @property
    def asset_ids(self) -> list[str]:
        return [s.asset_id for s in self.series]

    def observed_flags(self) -> np.ndarray:
        """Boolean (N, count+1) matrix of observed cells."""
        out = np.zeros((self.n_assets, self.grid.n_points), dtype=bool)
        for i, s in enumerate(self.series):
            out[i, s.obs_idx] = True
        return out

    def missing_fraction(self) -> np.ndarray:
        """Per-asset fraction of unobserved grid points."""
        n_pts = self.grid.n_points
        return np.array([1.0 - len(s) / n_pts for s in self.series])


@dataclass(frozen=True)
class MaskMatrix:
    """Boolean (N, count+1) matrix; True marks an artificially masked entry."""

    entries: np.ndarray

    def __post_init__(self):
        e = np.asarray(self.entries, dtype=bool)
        if e.ndim != 2:
            raise PanelError("mask must be 2-dimensional")
        if e[:, 0].any():
            raise PanelError("mask may not cover anchor column 0")
        e.setflags(write=False)
        object.__setattr__(self, "entries", e)

    @property
    def dims(self) -> tuple[int, int]:
        return self.entries.shape

    @property
    def n_masked(self) -> int:
        return int(self.entries.sum())


def align_to_grid(
    raw_ticks: Mapping[str, Sequence[tuple[float, float]]], grid: GridSpec
) -> ObservationPanel:
    """Snap raw (timestamp, price) trades onto the grid.

    A cell holds the log of the last trade inside it; cell ``j >= 1``
    covers ``(t0 + (j-1) step, t0 + j step]`` and cell 0 holds trades at
    exactly ``t0``.  Assets without a trade at ``t0`` get cell 0
    backfilled from their first trade so every series is anchored.
    Idempotent on already-aligned data.
    """
    series = []
    for asset_id, ticks in raw_ticks.items():
        if len(ticks) == 0:
            raise PanelError(f"{asset_id}: no trades")
        cells: dict[int, float] = {}
        first_ts = math.inf
        first_px = math.nan
        for ts, px in ticks:
            if px <= 0:
                raise PanelError(f"{asset_id}: non-positive price {px}")
            if ts < grid.t0 or ts > grid.t_end():
                raise PanelError(f"{asset_id}: timestamp {ts} outside grid range")
            if ts == grid.t0:
                j = 0
            else:
                j = math.ceil((ts - grid.t0) / grid.step)
            cells[j] = math.log(px)  # later trades in the same cell overwrite
            if ts < first_ts:
                first_ts, first_px = ts, px
        if 0 not in cells:
            cells[0] = math.log(first_px)
        idx = np.array(sorted(cells), dtype=np.int64)
        series.append(TickSeries(asset_id, idx, np.array([cells[j] for j in idx])))
    return ObservationPanel(grid, tuple(series))


def generate_mask(panel: ObservationPanel, p: float, seed: int) -> MaskMatrix:
    """Mask each observed non-anchor entry independently with probability ``p``."""
    if not 0 <= p < 1:
        raise PanelError(f"mask probability must be in [0, 1), got {p}")
    rng = np.random.default_rng(seed)
    entries = np.zeros((panel.n_assets, panel.grid.n_points), dtype=bool)
    for i, s in enumerate(panel.series):
        nonanchor = s.obs_idx[s.obs_idx > 0]
        hit = rng.random(nonanchor.size) < p
        entries[i, nonanchor[hit]] = True
    return MaskMatrix(entries)


def apply_mask(panel: ObservationPanel, mask: MaskMatrix) -> ObservationPanel:
    """Remove masked entries from the panel; everything else is unchanged."""
    if mask.dims != (panel.n_assets, panel.grid.n_points):
        raise PanelError(f"mask dims {mask.dims} do not match panel")
    observed = panel.observed_flags()
    if np.any(mask.entries & ~observed):
        raise PanelError("mask covers entries the panel never observed")
    series = []
    for i, s in enumerate(panel.series):
        keep = ~mask.entries[i, s.obs_idx]
        series.append(TickSeries(s.asset_id, s.obs_idx[keep], s.log_price[keep]))
    return ObservationPanel(panel.grid, tuple(series))


def split_days(panel: ObservationPanel, day_increments: int) -> list[ObservationPanel]:
    """Cut a multi-day panel into per-day panels with day-local grids.

    Day d covers grid points ``[d*day_increments, (d+1)*day_increments]``.
    If an asset has no observation at a day's first point, its first
    observation of that day is carried back to the day start (the same
    anchor rule as :func:`align_to_grid`); a day in which an asset never
    trades reuses the previous day's last price as a constant anchor.
    """
    n = panel.grid.count
    if day_increments < 1 or n % day_increments != 0:
        raise PanelError(f"grid of {n} increments does not split into days of {day_increments}")
    n_days = n // day_increments
    out = []
    for d in range(n_days):
        lo, hi = d * day_increments, (d + 1) * day_increments
        day_grid = GridSpec(panel.grid.t0 + lo * panel.grid.step, panel.grid.step, day_increments)
        series = []
        for s in panel.series:
            sel = (s.obs_idx >= lo) & (s.obs_idx <= hi)
            idx = s.obs_idx[sel] - lo
            px = s.log_price[sel]
            if idx.size == 0:
                # no trade this day: anchor at the last known price
                prev = np.searchsorted(s.obs_idx, lo) - 1
                idx = np.array([0], dtype=np.int64)
                px = np.array([s.log_price[max(prev, 0)]])
            elif idx[0] != 0:
                idx = np.concatenate([[0], idx])
                px = np.concatenate([[px[0]], px])
            series.append(TickSeries(s.asset_id, idx, px))
        out.append(ObservationPanel(day_grid, tuple(series)))
    return out


# ---------------------------------------------------------------------------
# CSV round trip.  Panel rows: asset,grid_index,log_price.  Grid metadata
# lives in a key=value sidecar next to the panel file.
# ---------------------------------------------------------------------------

def sidecar_path(path: str | Path) -> Path:
    return Path(path).with_suffix(".meta")


def write_panel(path: str | Path, panel: ObservationPanel, extra_meta: Mapping[str, str] | None = None) -> None:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["asset", "grid_index", "log_price"])
        for s in panel.series:
            for j, x in zip(s.obs_idx, s.log_price):
                w.writerow([s.asset_id, int(j), format(x, ".17g")])
    meta = {
        "t0": format(panel.grid.t0, ".17g"),
        "step_seconds": format(panel.grid.step, ".17g"),
        "n_increments": str(panel.grid.count),
    }
    if extra_meta:
        meta.update(extra_meta)
    with open(sidecar_path(path), "w") as fh:
        for k, v in meta.items():
            fh.write(f"{k}={v}\n")


def read_sidecar(path: str | Path) -> dict[str, str]:
    meta = {}
    with open(sidecar_path(path)) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ParseError(f"expected key=value, got {line!r}", lineno)
            k, v = line.split("=", 1)
            meta[k.strip()] = v.strip()
    return meta


def read_panel(path: str | Path) -> ObservationPanel:
    path = Path(path)
    meta = read_sidecar(path)
    try:
        grid = GridSpec(float(meta["t0"]), float(meta["step_seconds"]), int(meta["n_increments"]))
    except KeyError as exc:
        raise ParseError(f"sidecar missing key {exc}") from exc
    order: list[str] = []
    idx: dict[str, list[int]] = {}
    px: dict[str, list[float]] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["asset", "grid_index", "log_price"]:
            raise ParseError(f"bad panel header {header!r}", 1)
        for lineno, row in enumerate(reader, start=2):
            if len(row) != 3:
                raise ParseError(f"expected 3 fields, got {len(row)}", lineno)
            asset, j_s, x_s = row
            try:
                j, x = int(j_s), float(x_s)
            except ValueError as exc:
                raise ParseError(str(exc), lineno) from exc
            if asset not in idx:
                order.append(asset)
                idx[asset], px[asset] = [], []
            elif idx[asset] and j <= idx[asset][-1]:
                raise ParseError(f"{asset}: grid index {j} not increasing", lineno)
            idx[asset].append(j)
            px[asset].append(x)
    series = tuple(
        TickSeries(a, np.array(idx[a], dtype=np.int64), np.array(px[a])) for a in order
    )
    return ObservationPanel(grid, series)


def write_mask(path: str | Path, mask: MaskMatrix, asset_ids: Sequence[str]) -> None:
    rows, cols = np.nonzero(mask.entries)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["asset", "grid_index"])
        for i, j in zip(rows, cols):
            w.writerow([asset_ids[i], int(j)])


def read_mask(path: str | Path, panel: ObservationPanel) -> MaskMatrix:
    pos = {a: i for i, a in enumerate(panel.asset_ids)}
    entries = np.zeros((panel.n_assets, panel.grid.n_points), dtype=bool)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["asset", "grid_index"]:
            raise ParseError(f"bad mask header {header!r}", 1)
        for lineno, row in enumerate(reader, start=2):
            if len(row) != 2:
                raise ParseError(f"expected 2 fields, got {len(row)}", lineno)
            asset, j_s = row
            if asset not in pos:
                raise ParseError(f"unknown asset {asset!r}", lineno)
            try:
                j = int(j_s)
            except ValueError as exc:
                raise ParseError(str(exc), lineno) from exc
            entries[pos[asset], j] = True
    return MaskMatrix(entries)
