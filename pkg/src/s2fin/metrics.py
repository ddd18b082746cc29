"""Confusion-matrix classification metrics: OA, AA, Kappa."""

from __future__ import annotations

import warnings

import numpy as np


class ConfusionMatrix:
    """K x K count matrix, rows = reference labels, columns = predictions."""

    def __init__(self, num_classes: int):
        if num_classes < 1:
            raise ValueError("need at least one class")
        self.counts = np.zeros((num_classes, num_classes), dtype=np.int64)

    @classmethod
    def from_counts(cls, counts) -> "ConfusionMatrix":
        arr = np.asarray(counts, dtype=np.int64)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ValueError("confusion matrix must be square")
        if (arr < 0).any():
            raise ValueError("confusion matrix entries must be nonnegative")
        cm = cls(arr.shape[0])
        cm.counts = arr
        return cm

    @property
    def num_classes(self) -> int:
        return self.counts.shape[0]

    def update(self, reference, prediction) -> None:
        ref = np.asarray(reference, dtype=np.int64).ravel()
        pred = np.asarray(prediction, dtype=np.int64).ravel()
        if ref.shape != pred.shape:
            raise ValueError("reference/prediction length mismatch")
        np.add.at(self.counts, (ref, pred), 1)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def overall_accuracy(self) -> float:
        if self.total == 0:
            raise ValueError("empty confusion matrix")
        return float(np.trace(self.counts) / self.total)

    def per_class_accuracy(self) -> np.ndarray:
        """Per-class recall; NaN for classes absent from the reference."""
        row_sums = self.counts.sum(axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(row_sums > 0, np.diag(self.counts) / row_sums, np.nan)

    def average_accuracy(self) -> float:
        acc = self.per_class_accuracy()
        absent = np.flatnonzero(np.isnan(acc))
        if absent.size:
            warnings.warn(
                f"classes absent from the evaluation set excluded from AA: {absent.tolist()}",
                stacklevel=2,
            )
        if absent.size == self.num_classes:
            raise ValueError("no class present in the evaluation set")
        return float(np.nanmean(acc))

    def kappa(self) -> float:
        total = self.total
        if total == 0:
            raise ValueError("empty confusion matrix")
        p_o = np.trace(self.counts) / total
        rows = self.counts.sum(axis=1)
        cols = self.counts.sum(axis=0)
        p_e = float((rows * cols).sum()) / total**2
        if p_e == 1.0:
            return 1.0 if p_o == 1.0 else 0.0
        return float((p_o - p_e) / (1 - p_e))


def metrics_report(cm: ConfusionMatrix) -> str:
    """Structured text report, one key per line."""
    lines = [
        f"oa {cm.overall_accuracy():.12f}",
        f"aa {cm.average_accuracy():.12f}",
        f"kappa {cm.kappa():.12f}",
    ]
    for k, acc in enumerate(cm.per_class_accuracy()):
        lines.append(f"per_class_acc[{k}] {acc:.12f}")
    return "\n".join(lines) + "\n"
