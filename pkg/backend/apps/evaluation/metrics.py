"""
Patch-level metrics.

Confusion matrices have rows = true class, columns = predicted class, in
class order (Blank, Human, Robot). Undefined ratios (no support, or a class
never predicted) are reported as None.
"""

from dataclasses import dataclass

import numpy as np

from apps.core.exceptions import UsageError
from apps.patches.labels import NUM_CLASSES


@dataclass
class MetricsBundle:
    accuracy: float
    per_class_recall: list
    per_class_precision: list
    balanced_accuracy: float
    confusion: np.ndarray
    normalized_confusion: np.ndarray

    @property
    def support(self):
        return self.confusion.sum(axis=1)


def confusion_matrix(labels, preds, num_classes=NUM_CLASSES):
    matrix = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(matrix, (np.asarray(labels, dtype=np.int64), np.asarray(preds, dtype=np.int64)), 1)
    return matrix


def normalize_rows(confusion):
    """Row-normalize; rows with zero support become all zeros."""
    confusion = np.asarray(confusion, dtype=np.float64)
    totals = confusion.sum(axis=1, keepdims=True)
    return np.divide(confusion, totals, out=np.zeros_like(confusion), where=totals > 0)


def _ratios(diagonal, totals):
    return [float(d / t) if t > 0 else None for d, t in zip(diagonal, totals)]


def metrics_from_confusion(confusion):
    confusion = np.asarray(confusion, dtype=np.int64)
    diagonal = np.diag(confusion)
    recall = _ratios(diagonal, confusion.sum(axis=1))
    precision = _ratios(diagonal, confusion.sum(axis=0))
    defined = [r for r in recall if r is not None]
    total = confusion.sum()
    return MetricsBundle(
        accuracy=float(diagonal.sum() / total) if total else 0.0,
        per_class_recall=recall,
        per_class_precision=precision,
        balanced_accuracy=float(np.mean(defined)) if defined else 0.0,
        confusion=confusion,
        normalized_confusion=normalize_rows(confusion),
    )


def compute_metrics(preds, labels):
    """
    Accuracy, per-class recall/precision, balanced accuracy and confusion.

    Balanced accuracy is the mean recall over classes with support.

    Raises:
        UsageError: length mismatch, empty input or labels outside {0, 1, 2}
    """
    preds = np.asarray(preds, dtype=np.int64)
    labels = np.asarray(labels, dtype=np.int64)
    if preds.shape != labels.shape or preds.ndim != 1:
        raise UsageError(f'preds and labels must be equal-length lists, got {preds.shape} and {labels.shape}')
    if preds.size == 0:
        raise UsageError('compute_metrics needs at least one prediction')
    for values, what in ((labels, 'labels'), (preds, 'preds')):
        if values.min() < 0 or values.max() >= NUM_CLASSES:
            raise UsageError(f'{what} must lie in 0..{NUM_CLASSES - 1}')
    return metrics_from_confusion(confusion_matrix(labels, preds))


def aggregate_fold_accuracies(values):
    """Mean and sample standard deviation (ddof=1, 0 for one fold), folds equally weighted."""
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise UsageError('No fold accuracies to aggregate')
    std = float(values.std(ddof=1)) if values.size > 1 else 0.0
    return float(values.mean()), std
