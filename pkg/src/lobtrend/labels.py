"""Trend labels from mid-price series.

The label at step t compares the mean of the k strictly-future mid-prices
against the current mid: ratios above 1+alpha are up (+1), below 1-alpha
are down (-1), anything inside the band is stationary (0). Equality at a
boundary is stationary (the comparisons are strict). The backward-looking
mean filter is kept only for reproducing the older labeling scheme and is
not part of the default pipeline.

Labels are undefined for the final k steps of a day (no full future
window); those steps are excluded from training and evaluation.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import TextIO, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

CLASSES = (-1, 0, 1)           # index order used everywhere: down, stationary, up
N_CLASSES = 3


class LabelError(ValueError):
    pass


@dataclass
class LabelSeries:
    labels: np.ndarray     # (n,) int8; only [valid_start, valid_end] is defined
    horizon: int
    alpha: float
    valid_start: int
    valid_end: int         # inclusive

    def __len__(self) -> int:
        return int(self.labels.shape[0])

    @property
    def valid_labels(self) -> np.ndarray:
        return self.labels[self.valid_start:self.valid_end + 1]

    def defined_mask(self) -> np.ndarray:
        mask = np.zeros(len(self), dtype=bool)
        mask[self.valid_start:self.valid_end + 1] = True
        return mask


@dataclass(frozen=True)
class ClassWeights:
    """Inverse-frequency weights: |D| / (n_classes * |D_i|) per class."""

    weights: np.ndarray    # (3,) float64, ordered (down, stationary, up)

    def for_label(self, label: int) -> float:
        return float(self.weights[label + 1])

    @classmethod
    def uniform(cls) -> "ClassWeights":
        return cls(weights=np.ones(N_CLASSES))


def future_mean(p: np.ndarray, t: int, k: int) -> float:
    """Mean of the k mid-prices strictly after t."""
    if k <= 0:
        raise LabelError("horizon must be positive")
    if t < 0 or t + k > len(p) - 1:
        raise LabelError(f"future window [{t + 1}, {t + k}] out of range (n={len(p)})")
    return float(np.mean(p[t + 1:t + k + 1]))


def past_mean(p: np.ndarray, t: int, k: int) -> float:
    """Mean over the current and k past mid-prices (k+1 terms)."""
    if k <= 0:
        raise LabelError("horizon must be positive")
    if t - k < 0 or t > len(p) - 1:
        raise LabelError(f"past window [{t - k}, {t}] out of range (n={len(p)})")
    return float(np.mean(p[t - k:t + 1]))


def label_series(p: np.ndarray, k: int, alpha: float) -> LabelSeries:
    """Label every step with a full future window; strict band comparisons."""
    p = np.asarray(p, dtype=np.float64)
    if alpha < 0:
        raise LabelError("alpha must be non-negative")
    n = len(p)
    if n <= k:
        raise LabelError(f"series of length {n} too short for horizon {k}")
    future = sliding_window_view(p[1:], k).mean(axis=1)   # future[t] over t+1..t+k
    ratio = future / p[:n - k]
    labels = np.zeros(n, dtype=np.int8)
    valid = slice(0, n - k)
    labels[valid] = np.where(ratio > 1.0 + alpha, 1,
                             np.where(ratio < 1.0 - alpha, -1, 0)).astype(np.int8)
    return LabelSeries(labels=labels, horizon=k, alpha=alpha,
                       valid_start=0, valid_end=n - k - 1)


def class_distribution(ls: LabelSeries) -> np.ndarray:
    """Fractions of (down, stationary, up) over the defined labels."""
    valid = ls.valid_labels
    if valid.size == 0:
        raise LabelError("no defined labels")
    counts = np.array([(valid == c).sum() for c in CLASSES], dtype=np.float64)
    return counts / valid.size


def class_counts(ls: LabelSeries) -> np.ndarray:
    valid = ls.valid_labels
    return np.array([(valid == c).sum() for c in CLASSES], dtype=np.int64)


@dataclass
class CalibrationResult:
    alpha: float
    distribution: np.ndarray
    converged: bool
    iterations: int


def calibrate_alpha(
    p, k: int, target_stationary: float,
    tol: float = 0.02, max_iter: int = 50,
) -> CalibrationResult:
    """Bisect alpha until the stationary fraction is within tol of the target.

    ``p`` is one mid-price series or a list of per-day series (windows never
    cross days; distributions pool across days). The stationary fraction is
    non-decreasing in alpha (band nesting), so plain bisection converges; a
    constant series or an unreachable target raises LabelError.
    """
    if not (0.0 < target_stationary < 1.0):
        raise LabelError("target_stationary must be in (0, 1)")
    series_list = p if isinstance(p, (list, tuple)) else [p]
    series_list = [np.asarray(s, dtype=np.float64) for s in series_list]

    def stationary_fraction(alpha: float) -> np.ndarray:
        counts = sum(class_counts(label_series(s, k, alpha)) for s in series_list)
        return counts / counts.sum()

    lo, hi = 0.0, 1e-6
    dist_hi = stationary_fraction(hi)
    it = 0
    while dist_hi[1] < target_stationary and hi < 1.0:
        hi *= 4.0
        dist_hi = stationary_fraction(hi)
        it += 1
        if it > 60:
            break
    if dist_hi[1] < target_stationary:
        raise LabelError(
            f"cannot reach stationary fraction {target_stationary:.3f}; "
            f"saturates at {dist_hi[1]:.3f}")
    dist_lo = stationary_fraction(lo)
    if dist_lo[1] > target_stationary + tol:
        # alpha >= 0 cannot lower the stationary fraction (band nesting),
        # so a (near-)constant series makes the target unattainable
        raise LabelError(
            f"cannot reach stationary fraction {target_stationary:.3f}: "
            f"already {dist_lo[1]:.3f} at alpha=0")
    best_alpha, best_dist = hi, dist_hi
    for i in range(max_iter):
        mid = 0.5 * (lo + hi)
        dist = stationary_fraction(mid)
        if abs(dist[1] - target_stationary) < abs(best_dist[1] - target_stationary):
            best_alpha, best_dist = mid, dist
        if abs(dist[1] - target_stationary) <= tol:
            return CalibrationResult(alpha=mid, distribution=dist,
                                     converged=True, iterations=i + 1)
        if dist[1] < target_stationary:
            lo = mid
        else:
            hi = mid
    return CalibrationResult(alpha=best_alpha, distribution=best_dist,
                             converged=abs(best_dist[1] - target_stationary) <= tol,
                             iterations=max_iter)


def class_weights(ls: LabelSeries) -> ClassWeights:
    """Weights |D| / (n * |D_i|); raises if any class is absent."""
    counts = class_counts(ls)
    total = int(counts.sum())
    if total == 0:
        raise LabelError("no defined labels")
    missing = [CLASSES[i] for i in range(N_CLASSES) if counts[i] == 0]
    if missing:
        raise LabelError(
            f"class(es) {missing} absent; drop or merge before weighting")
    return ClassWeights(weights=total / (N_CLASSES * counts.astype(np.float64)))


def class_weights_from_labels(labels: np.ndarray) -> ClassWeights:
    """Same formula applied to a flat array of labels in {-1, 0, +1}."""
    counts = np.array([(labels == c).sum() for c in CLASSES], dtype=np.int64)
    total = int(counts.sum())
    if total == 0:
        raise LabelError("no labels")
    missing = [CLASSES[i] for i in range(N_CLASSES) if counts[i] == 0]
    if missing:
        raise LabelError(
            f"class(es) {missing} absent; drop or merge before weighting")
    return ClassWeights(weights=total / (N_CLASSES * counts.astype(np.float64)))


def write_labels(ls: LabelSeries, dest: Union[str, Path, TextIO]) -> None:
    """Line-delimited (index, label) pairs with a header recording k and alpha."""
    close_after = False
    if isinstance(dest, (str, Path)):
        handle: TextIO = open(dest, "w")
        close_after = True
    else:
        handle = dest
    try:
        handle.write(f"# k={ls.horizon} alpha={ls.alpha!r} "
                     f"valid_start={ls.valid_start} valid_end={ls.valid_end}\n")
        for i in range(ls.valid_start, ls.valid_end + 1):
            handle.write(f"{i},{int(ls.labels[i])}\n")
    finally:
        if close_after:
            handle.close()


def read_labels(source: Union[str, Path, TextIO]) -> LabelSeries:
    close_after = False
    if isinstance(source, (str, Path)):
        handle: TextIO = open(source, "r")
        close_after = True
    else:
        handle = source
    try:
        header = handle.readline().strip()
        if not header.startswith("#"):
            raise LabelError("label file missing header line")
        fields = dict(part.split("=", 1) for part in header[1:].split())
        k = int(fields["k"])
        alpha = float(fields["alpha"])
        valid_start = int(fields["valid_start"])
        valid_end = int(fields["valid_end"])
        labels = np.zeros(valid_end + 1 + k, dtype=np.int8)
        for line in handle:
            line = line.strip()
            if not line:
                continue
            idx_s, lab_s = line.split(",")
            labels[int(idx_s)] = int(lab_s)
        return LabelSeries(labels=labels, horizon=k, alpha=alpha,
                           valid_start=valid_start, valid_end=valid_end)
    finally:
        if close_after:
            handle.close()
