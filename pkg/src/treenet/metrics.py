"""Confusion-matrix based multiclass evaluation.

Everything is computed from one C by C count matrix (rows = actual class,
columns = predicted class). Zero denominators yield 0 rather than NaN so
reports stay total and comparable across runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .errors import LabelOutOfRange, LengthMismatch

IntMatrix = NDArray[np.int64]


@dataclass
class ConfusionMatrix:
    """Count matrix with counts[actual][predicted]."""

    counts: IntMatrix

    def __post_init__(self) -> None:
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.ndim != 2 or counts.shape[0] != counts.shape[1]:
            raise ValueError("confusion matrix must be square")
        if (counts < 0).any():
            raise ValueError("confusion matrix entries must be nonnegative")
        self.counts = counts

    @property
    def n_classes(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def class_support(self) -> IntMatrix:
        """Actual-class counts (row sums)."""
        return self.counts.sum(axis=1)


@dataclass
class AggregateScores:
    """One score family: per-class values plus macro and weighted means."""

    per_class: NDArray[np.float64]
    macro: float
    weighted: float

    def as_dict(self) -> dict:
        return {
            "per_class": [float(v) for v in self.per_class],
            "macro": self.macro,
            "weighted": self.weighted,
        }


@dataclass
class MetricsReport:
    """Full evaluation bundle for one prediction set."""

    accuracy: float
    precision: AggregateScores
    recall: AggregateScores
    f1: AggregateScores
    mcc: float

    def as_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "precision": self.precision.as_dict(),
            "recall": self.recall.as_dict(),
            "f1": self.f1.as_dict(),
            "mcc": self.mcc,
        }

    def scalars(self) -> dict:
        """Flat mapping of the headline scalar fields."""
        return {
            "accuracy": self.accuracy,
            "precision_macro": self.precision.macro,
            "precision_weighted": self.precision.weighted,
            "recall_macro": self.recall.macro,
            "recall_weighted": self.recall.weighted,
            "f1_macro": self.f1.macro,
            "f1_weighted": self.f1.weighted,
            "mcc": self.mcc,
        }


def confusion(y_true, y_pred, n_classes: int) -> ConfusionMatrix:
    """Count actual/predicted pairs into a ConfusionMatrix.

    Raises:
        LengthMismatch: inputs differ in length or are empty.
        LabelOutOfRange: any value outside [0, n_classes).
    """
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.shape != y_pred.shape or y_true.ndim != 1:
        raise LengthMismatch(int(y_true.size), int(y_pred.size))
    if y_true.size == 0:
        raise LengthMismatch(0, 0)
    for arr in (y_true, y_pred):
        if arr.size and (arr.min() < 0 or arr.max() >= n_classes):
            bad = int(arr[(arr < 0) | (arr >= n_classes)][0])
            raise LabelOutOfRange(bad, n_classes)
    counts = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(counts, (y_true, y_pred), 1)
    return ConfusionMatrix(counts)


def accuracy(cm: ConfusionMatrix) -> float:
    total = cm.total
    if total < 1:
        raise ValueError("confusion matrix is empty")
    return float(np.trace(cm.counts)) / total


def precision_recall_per_class(
    cm: ConfusionMatrix,
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Per-class precision and recall with the zero-denominator -> 0 policy."""
    counts = cm.counts
    tp = np.diag(counts).astype(np.float64)
    predicted = counts.sum(axis=0).astype(np.float64)
    actual = counts.sum(axis=1).astype(np.float64)
    precision = np.divide(tp, predicted, out=np.zeros_like(tp), where=predicted > 0)
    recall = np.divide(tp, actual, out=np.zeros_like(tp), where=actual > 0)
    return precision, recall


def f_beta(precision: float, recall: float, beta: float = 1.0) -> float:
    """F-beta score; 0 when precision and recall are both 0."""
    if beta <= 0:
        raise ValueError("beta must be positive")
    denom = beta * beta * precision + recall
    if denom == 0.0:
        return 0.0
    return (1.0 + beta * beta) * precision * recall / denom


def aggregate(per_class, support, mode: str) -> float:
    """Aggregate per-class scores.

    mode "macro" is the unweighted mean; "weighted" weights each class by
    its share of the support counts.
    """
    per_class = np.asarray(per_class, dtype=np.float64)
    support = np.asarray(support, dtype=np.int64)
    if per_class.shape != support.shape:
        raise LengthMismatch(int(per_class.size), int(support.size))
    total = int(support.sum())
    if total < 1:
        raise ValueError("support sums to zero")
    if mode == "macro":
        return float(per_class.mean())
    if mode == "weighted":
        out = 0.0
        for k in range(per_class.size):
            out += (int(support[k]) / total) * float(per_class[k])
        return out
    raise ValueError(f"unknown aggregate mode {mode!r}")


def mcc(cm: ConfusionMatrix) -> float:
    """Matthews correlation from the full count matrix.

    Uses the covariance-form multiclass generalization; at C=2 it equals
    the familiar (TP*TN - FP*FN) / sqrt((TP+FP)(TP+FN)(TN+FP)(TN+FN))
    exactly. A zero factor in the denominator yields 0.
    """
    counts = cm.counts
    total = int(counts.sum())
    if total < 1:
        raise ValueError("confusion matrix is empty")
    trace = int(np.trace(counts))
    actual = [int(v) for v in counts.sum(axis=1)]
    predicted = [int(v) for v in counts.sum(axis=0)]
    # Exact integer arithmetic until the final square root.
    cov_tp = trace * total - sum(p * a for p, a in zip(predicted, actual))
    denom_pred = total * total - sum(p * p for p in predicted)
    denom_true = total * total - sum(a * a for a in actual)
    if denom_pred == 0 or denom_true == 0:
        return 0.0
    return cov_tp / math.sqrt(denom_pred * denom_true)


def metrics_report(cm: ConfusionMatrix, beta: float = 1.0) -> MetricsReport:
    """Bundle accuracy, precision/recall/F, and MCC for one matrix."""
    precision, recall = precision_recall_per_class(cm)
    f_scores = np.array(
        [f_beta(float(p), float(r), beta) for p, r in zip(precision, recall)]
    )
    support = cm.class_support()

    def agg(values) -> AggregateScores:
        return AggregateScores(
            per_class=values,
            macro=aggregate(values, support, "macro"),
            weighted=aggregate(values, support, "weighted"),
        )

    return MetricsReport(
        accuracy=accuracy(cm),
        precision=agg(precision),
        recall=agg(recall),
        f1=agg(f_scores),
        mcc=mcc(cm),
    )


def evaluate_predictions(y_true, y_pred, n_classes: int) -> MetricsReport:
    """Shortcut: confusion then metrics_report."""
    return metrics_report(confusion(y_true, y_pred, n_classes))


def weighted_f1(y_true, y_pred, n_classes: int) -> float:
    """Weighted F1, the headline score used for cascade growth decisions."""
    return evaluate_predictions(y_true, y_pred, n_classes).f1.weighted
