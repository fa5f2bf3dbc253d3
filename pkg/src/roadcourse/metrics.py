"""Confusion-matrix metrics for pixel labeling.

Provides accuracy, per-class and global intersection-over-union, and the
multi-class Matthews correlation coefficient, all derived from one K x K
confusion matrix with rows indexing the true class.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import InvalidInputError
from .labeling import CLASS_NAMES, N_CLASSES


class ConfusionMatrix:
    """K x K pixel counts; counts[i, j] = pixels of true class i predicted j."""

    def __init__(self, counts):
        counts = np.asarray(counts, dtype=np.int64)
        if counts.ndim != 2 or counts.shape[0] != counts.shape[1]:
            raise InvalidInputError("confusion matrix must be square")
        if counts.size and counts.min() < 0:
            raise InvalidInputError("confusion matrix entries must be >= 0")
        self.counts = counts

    @classmethod
    def zeros(cls, n_classes: int = N_CLASSES) -> "ConfusionMatrix":
        return cls(np.zeros((n_classes, n_classes), dtype=np.int64))

    @property
    def n_classes(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix(self.counts + other.counts)

    def tp(self, k: int) -> int:
        return int(self.counts[k, k])

    def fp(self, k: int) -> int:
        return int(self.counts[:, k].sum() - self.counts[k, k])

    def fn(self, k: int) -> int:
        return int(self.counts[k, :].sum() - self.counts[k, k])

    def tn(self, k: int) -> int:
        return self.total - self.tp(k) - self.fp(k) - self.fn(k)


def accumulate(truth, prediction, n_classes: int = N_CLASSES) -> ConfusionMatrix:
    """Count (truth, prediction) label pairs into a confusion matrix.

    Arguments:
        truth: 2D integer label array (or ClassMembershipMap).
        prediction: same shape as truth.
        n_classes: matrix size K.

    Returns:
        ConfusionMatrix with rows = true class, columns = predicted class.
    """
    truth = getattr(truth, "labels", truth)
    prediction = getattr(prediction, "labels", prediction)
    truth = np.asarray(truth)
    prediction = np.asarray(prediction)
    if truth.shape != prediction.shape:
        raise InvalidInputError("truth and prediction dimensions differ")
    pairs = truth.astype(np.int64).ravel() * n_classes + prediction.ravel()
    counts = np.bincount(pairs, minlength=n_classes * n_classes)
    return ConfusionMatrix(counts.reshape(n_classes, n_classes))


def iou(cm: ConfusionMatrix, k: int) -> Optional[float]:
    """Intersection over union TP / (TP + FP + FN) for class k.

    Returns:
        The IU value, or None when the class appears in neither truth
        nor prediction (undefined denominator; excluded from averages).
    """
    denom = cm.tp(k) + cm.fp(k) + cm.fn(k)
    if denom == 0:
        return None
    return cm.tp(k) / denom


def accuracy(cm: ConfusionMatrix) -> float:
    total = cm.total
    if total == 0:
        return 0.0
    return float(np.trace(cm.counts)) / total


def mcc(cm: ConfusionMatrix) -> float:
    """Multi-class Matthews correlation coefficient.

    Computed from the full confusion matrix as
    (c*s - sum_k p_k*t_k) / sqrt((s^2 - sum p_k^2) * (s^2 - sum t_k^2))
    where c is the trace, s the total count, p_k the predicted-class
    totals and t_k the true-class totals. A degenerate (zero) denominator
    yields 0 by convention.
    """
    counts = cm.counts.astype(np.float64)
    s = counts.sum()
    c = np.trace(counts)
    t_k = counts.sum(axis=1)  # true totals
    p_k = counts.sum(axis=0)  # predicted totals
    cov = c * s - float(p_k @ t_k)
    denom_sq = (s * s - float(p_k @ p_k)) * (s * s - float(t_k @ t_k))
    if denom_sq <= 0.0:
        return 0.0
    return float(cov / np.sqrt(denom_sq))


@dataclass(frozen=True)
class MetricsReport:
    mcc: float
    acc: float
    iu_per_class: tuple
    iu_global: Optional[float]


def compute_report(cm: ConfusionMatrix) -> MetricsReport:
    """Bundle MCC, ACC and IU values for one confusion matrix."""
    ius = tuple(iou(cm, k) for k in range(cm.n_classes))
    defined = [v for v in ius if v is not None]
    return MetricsReport(
        mcc=mcc(cm),
        acc=accuracy(cm),
        iu_per_class=ius,
        iu_global=float(np.mean(defined)) if defined else None,
    )


def write_report_csv(path, report: MetricsReport) -> None:
    """Write `metric,class,value` rows; undefined IUs are omitted."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["metric", "class", "value"])
        writer.writerow(["mcc", "", f"{report.mcc:.6f}"])
        writer.writerow(["acc", "", f"{report.acc:.6f}"])
        for k, value in enumerate(report.iu_per_class):
            if value is not None:
                name = CLASS_NAMES[k] if k < len(CLASS_NAMES) else str(k)
                writer.writerow(["iu", name, f"{value:.6f}"])
        if report.iu_global is not None:
            writer.writerow(["iu_global", "", f"{report.iu_global:.6f}"])
