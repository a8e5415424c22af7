"""Confusion-matrix evaluation: Cohen's kappa and macro recall/precision/F1.

Counts are integer and additive, so sharded evaluation merges exactly.
Classes are ordered (down, stationary, up) = (-1, 0, +1).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .labels import CLASSES, N_CLASSES


class MetricError(ValueError):
    pass


@dataclass
class ConfusionMatrix:
    counts: np.ndarray = field(
        default_factory=lambda: np.zeros((N_CLASSES, N_CLASSES), dtype=np.int64))
    # rows = true class, columns = predicted class

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def merge(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix(counts=self.counts + other.counts)

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return self.merge(other)


def accumulate(truth: np.ndarray, pred: np.ndarray,
               into: ConfusionMatrix | None = None) -> ConfusionMatrix:
    """Count (true, predicted) pairs; labels must lie in {-1, 0, +1}."""
    truth = np.asarray(truth).ravel()
    pred = np.asarray(pred).ravel()
    if truth.shape != pred.shape:
        raise MetricError(
            f"length mismatch: {truth.shape[0]} truth vs {pred.shape[0]} predictions")
    for name, arr in (("truth", truth), ("prediction", pred)):
        bad = ~np.isin(arr, CLASSES)
        if bad.any():
            raise MetricError(
                f"{name} contains out-of-domain label {arr[bad][0]}")
    cm = into if into is not None else ConfusionMatrix()
    idx = (truth + 1) * N_CLASSES + (pred + 1)
    binc = np.bincount(idx.astype(np.int64), minlength=N_CLASSES * N_CLASSES)
    cm.counts += binc.reshape(N_CLASSES, N_CLASSES)
    return cm


def kappa(cm: ConfusionMatrix) -> float:
    """Chance-corrected agreement; degenerate p_e = 1 is defined as 0."""
    total = cm.total
    if total == 0:
        raise MetricError("empty confusion matrix")
    counts = cm.counts.astype(np.float64)
    p_o = np.trace(counts) / total
    row = counts.sum(axis=1)
    col = counts.sum(axis=0)
    p_e = float((row * col).sum()) / (total * total)
    if p_e == 1.0:
        warnings.warn("kappa undefined (p_e = 1); returning 0")
        return 0.0
    return float((p_o - p_e) / (1.0 - p_e))


@dataclass(frozen=True)
class MacroScores:
    recall: float
    precision: float
    f1: float            # mean of per-class F1 (primary figure)
    f1_macro_pr: float   # harmonic mean of macro precision and macro recall
    per_class_recall: tuple[float, float, float]
    per_class_precision: tuple[float, float, float]
    per_class_f1: tuple[float, float, float]


def macro_scores(cm: ConfusionMatrix) -> MacroScores:
    """Unweighted class means; 0/0 contributes 0 with a warning."""
    total = cm.total
    if total == 0:
        raise MetricError("empty confusion matrix")
    counts = cm.counts.astype(np.float64)
    diag = np.diag(counts)
    row = counts.sum(axis=1)
    col = counts.sum(axis=0)

    recalls = np.zeros(N_CLASSES)
    precisions = np.zeros(N_CLASSES)
    f1s = np.zeros(N_CLASSES)
    for i in range(N_CLASSES):
        if row[i] > 0:
            recalls[i] = diag[i] / row[i]
        else:
            warnings.warn(f"class {CLASSES[i]} absent from truth; recall set to 0")
        if col[i] > 0:
            precisions[i] = diag[i] / col[i]
        else:
            warnings.warn(f"class {CLASSES[i]} never predicted; precision set to 0")
        if precisions[i] + recalls[i] > 0:
            f1s[i] = 2 * precisions[i] * recalls[i] / (precisions[i] + recalls[i])

    macro_r = float(recalls.mean())
    macro_p = float(precisions.mean())
    f1_pr = 0.0
    if macro_p + macro_r > 0:
        f1_pr = 2 * macro_p * macro_r / (macro_p + macro_r)
    return MacroScores(
        recall=macro_r, precision=macro_p, f1=float(f1s.mean()), f1_macro_pr=f1_pr,
        per_class_recall=tuple(recalls), per_class_precision=tuple(precisions),
        per_class_f1=tuple(f1s))
