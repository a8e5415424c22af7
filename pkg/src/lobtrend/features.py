"""Feature extraction from snapshot series.

Two feature families:

* stationary (41 columns): proportional differences of the 10 price levels
  per side to the current mid, the one-step proportional mid-price return,
  and per-side cumulative depth. Price columns are ratios, so the family is
  invariant to the absolute price level.
* raw (40 columns): the snapshot values as-is, z-scored with statistics
  from the same stock's previous day. Kept as the comparison baseline.

Column layout, stationary: [0:10] ask price diffs, [10:20] bid price diffs,
[20] mid return, [21:31] ask depth cumsum, [31:41] bid depth cumsum.
Raw: file order (ask prices, ask volumes, bid prices, bid volumes).

Row t of a feature matrix corresponds to snapshot t+1 of the source series;
the first snapshot has no return and is dropped.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .binio import read_container, write_container
from .book import DEPTH, BookSnapshot, SnapshotSeries, mid_price, mid_prices

STATIONARY_WIDTH = 2 * DEPTH + 1 + 2 * DEPTH   # 41
RAW_WIDTH = 4 * DEPTH                          # 40
DEGENERATE_STD_EPS = 1e-8

GROUP_COLUMNS = {
    "stationary": {
        "price_diff": np.arange(0, 20),
        "mid_return": np.arange(20, 21),
        "depth_cumsum": np.arange(21, 41),
    },
    "raw": {
        "price": np.concatenate([np.arange(0, 10), np.arange(20, 30)]),
        "volume": np.concatenate([np.arange(10, 20), np.arange(30, 40)]),
    },
}


class FeatureError(ValueError):
    pass


@dataclass
class NormStats:
    """Pooled per-group mean and population std, fitted on training data."""

    kind: str
    mean: dict[str, float]
    std: dict[str, float]
    count: int
    degenerate: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "mean": self.mean,
            "std": self.std,
            "count": self.count,
            "degenerate": list(self.degenerate),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NormStats":
        return cls(kind=d["kind"], mean=dict(d["mean"]), std=dict(d["std"]),
                   count=int(d["count"]), degenerate=tuple(d.get("degenerate", ())))

    def save(self, path: str | Path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path: str | Path) -> "NormStats":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


@dataclass
class FeatureMatrix:
    values: np.ndarray            # (rows, F) float64
    snapshot_index: np.ndarray    # (rows,) int64, index into the source series
    kind: str                     # "stationary" | "raw"
    normalized: bool = False
    stock_id: str = ""
    day_id: str = ""

    @property
    def feature_width(self) -> int:
        return int(self.values.shape[1])

    @property
    def rows(self) -> int:
        return int(self.values.shape[0])


def price_level_diffs(s: BookSnapshot) -> np.ndarray:
    """20-vector of proportional level-price differences to the mid (ask then bid)."""
    pm = mid_price(s)
    out = np.empty(2 * DEPTH)
    out[:DEPTH] = s.ask_prices / pm - 1.0
    out[DEPTH:] = s.bid_prices / pm - 1.0
    return out


def mid_price_return(p_now: float, p_prev: float) -> float:
    """One-step proportional mid-price change."""
    if p_prev <= 0:
        raise FeatureError(f"previous mid-price must be positive, got {p_prev}")
    return p_now / p_prev - 1.0


def depth_cumsums(s: BookSnapshot) -> np.ndarray:
    """20-vector of cumulative volume through each level (ask then bid)."""
    out = np.empty(2 * DEPTH)
    out[:DEPTH] = np.cumsum(s.ask_volumes)
    out[DEPTH:] = np.cumsum(s.bid_volumes)
    return out


def stationary_prenorm(series: SnapshotSeries) -> FeatureMatrix:
    """Pre-normalization stationary features for snapshots 1..n-1."""
    n = len(series)
    if n < 2:
        raise FeatureError("series must contain at least 2 snapshots")
    pm = mid_prices(series)
    values = np.empty((n - 1, STATIONARY_WIDTH))
    values[:, 0:DEPTH] = series.ask_prices[1:] / pm[1:, None] - 1.0
    values[:, DEPTH:2 * DEPTH] = series.bid_prices[1:] / pm[1:, None] - 1.0
    values[:, 2 * DEPTH] = pm[1:] / pm[:-1] - 1.0
    values[:, 2 * DEPTH + 1:2 * DEPTH + 1 + DEPTH] = np.cumsum(series.ask_volumes[1:], axis=1)
    values[:, 2 * DEPTH + 1 + DEPTH:] = np.cumsum(series.bid_volumes[1:], axis=1)
    return FeatureMatrix(values=values, snapshot_index=np.arange(1, n, dtype=np.int64),
                         kind="stationary", stock_id=series.stock_id, day_id=series.day_id)


def raw_prenorm(series: SnapshotSeries) -> FeatureMatrix:
    """Raw 40-column snapshot values for snapshots 1..n-1 (same alignment)."""
    n = len(series)
    if n < 2:
        raise FeatureError("series must contain at least 2 snapshots")
    values = np.concatenate(
        [series.ask_prices[1:], series.ask_volumes[1:],
         series.bid_prices[1:], series.bid_volumes[1:]], axis=1).astype(np.float64)
    return FeatureMatrix(values=values, snapshot_index=np.arange(1, n, dtype=np.int64),
                         kind="raw", stock_id=series.stock_id, day_id=series.day_id)


def fit_norm_stats(m: FeatureMatrix) -> NormStats:
    """Pool every entry of each feature group and take mean/population std."""
    if m.normalized:
        raise FeatureError("fit expects pre-normalization features")
    if m.rows < 2:
        raise FeatureError("need at least 2 rows to fit normalization stats")
    groups = GROUP_COLUMNS[m.kind]
    mean: dict[str, float] = {}
    std: dict[str, float] = {}
    degenerate = []
    for name, cols in groups.items():
        block = m.values[:, cols]
        mean[name] = float(block.mean())
        std[name] = float(block.std())
        if std[name] == 0.0:
            degenerate.append(name)
            warnings.warn(f"feature group '{name}' has zero variance; "
                          f"normalizing with eps={DEGENERATE_STD_EPS}")
    return NormStats(kind=m.kind, mean=mean, std=std, count=m.rows,
                     degenerate=tuple(degenerate))


def fit_norm_stats_many(mats: list[FeatureMatrix]) -> NormStats:
    """Fit pooled stats over several matrices (e.g. all training days)."""
    if not mats:
        raise FeatureError("no matrices to fit on")
    kind = mats[0].kind
    if any(m.kind != kind or m.normalized for m in mats):
        raise FeatureError("matrices must share a kind and be pre-normalization")
    stacked = FeatureMatrix(
        values=np.concatenate([m.values for m in mats], axis=0),
        snapshot_index=np.concatenate([m.snapshot_index for m in mats]),
        kind=kind)
    return fit_norm_stats(stacked)


def apply_norm(m: FeatureMatrix, stats: NormStats) -> FeatureMatrix:
    if stats.kind != m.kind:
        raise FeatureError(f"stats kind '{stats.kind}' does not match matrix kind '{m.kind}'")
    out = m.values.copy()
    for name, cols in GROUP_COLUMNS[m.kind].items():
        denom = max(stats.std[name], DEGENERATE_STD_EPS)
        out[:, cols] = (out[:, cols] - stats.mean[name]) / denom
    return FeatureMatrix(values=out, snapshot_index=m.snapshot_index.copy(),
                         kind=m.kind, normalized=True,
                         stock_id=m.stock_id, day_id=m.day_id)


def stationary_features(
    series: SnapshotSeries, stats: NormStats | None = None
) -> tuple[FeatureMatrix, NormStats]:
    """Normalized stationary features; fits stats on this series when none given."""
    pre = stationary_prenorm(series)
    if stats is None:
        stats = fit_norm_stats(pre)
    return apply_norm(pre, stats), stats


def raw_features(series: SnapshotSeries, prev_day_stats: NormStats) -> FeatureMatrix:
    """Raw features z-scored with the previous day's statistics."""
    if prev_day_stats is None:
        raise FeatureError("raw features require previous-day normalization stats")
    pre = raw_prenorm(series)
    return apply_norm(pre, prev_day_stats)


def window(m: FeatureMatrix, start: int, w: int) -> FeatureMatrix:
    if start < 0 or w <= 0 or start + w > m.rows:
        raise FeatureError(
            f"window [{start}, {start + w}) out of range for {m.rows} rows")
    return FeatureMatrix(values=m.values[start:start + w],
                         snapshot_index=m.snapshot_index[start:start + w],
                         kind=m.kind, normalized=m.normalized,
                         stock_id=m.stock_id, day_id=m.day_id)


def flatten_window(m: FeatureMatrix | np.ndarray) -> np.ndarray:
    """Time-major flatten: step 0's features first."""
    values = m.values if isinstance(m, FeatureMatrix) else m
    return np.ascontiguousarray(values).reshape(-1)


def write_features(path: str | Path, m: FeatureMatrix, stats: NormStats | None = None) -> None:
    meta = {
        "format": "lobtrend-features",
        "kind": m.kind,
        "normalized": m.normalized,
        "feature_width": m.feature_width,
        "rows": m.rows,
        "stock_id": m.stock_id,
        "day_id": m.day_id,
        "stats": stats.to_dict() if stats is not None else None,
    }
    write_container(path, meta, {
        "values": m.values,
        "snapshot_index": m.snapshot_index,
    })


def read_features(path: str | Path) -> tuple[FeatureMatrix, NormStats | None]:
    meta, arrays = read_container(path)
    if meta.get("format") != "lobtrend-features":
        raise FeatureError(f"{path}: not a feature file")
    m = FeatureMatrix(values=arrays["values"], snapshot_index=arrays["snapshot_index"],
                      kind=meta["kind"], normalized=meta["normalized"],
                      stock_id=meta.get("stock_id", ""), day_id=meta.get("day_id", ""))
    stats = NormStats.from_dict(meta["stats"]) if meta.get("stats") else None
    return m, stats
