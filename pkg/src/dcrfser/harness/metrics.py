"""Confusion matrices and precision/recall/F1 summaries."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ShapeMismatch


def confusion_matrix(y_true, y_pred, n_classes: int) -> np.ndarray:
    """Counts with rows indexed by true label and columns by prediction."""
    y_true = np.asarray(y_true, dtype=np.int64).ravel()
    y_pred = np.asarray(y_pred, dtype=np.int64).ravel()
    if y_true.shape != y_pred.shape:
        raise ShapeMismatch(f"{y_true.size} labels vs {y_pred.size} predictions")
    for y in (y_true, y_pred):
        if y.size and (y.min() < 0 or y.max() >= n_classes):
            raise ValueError(f"label outside [0, {n_classes})")
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (y_true, y_pred), 1)
    return cm


def _safe_ratio(num, den):
    num = np.asarray(num, dtype=np.float64)
    den = np.asarray(den, dtype=np.float64)
    return np.divide(num, den, out=np.zeros_like(num), where=den > 0)


@dataclass(frozen=True)
class Metrics:
    accuracy: float
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    support: np.ndarray
    macro: dict
    weighted: dict
    confusion: np.ndarray
    class_names: tuple

    def to_dict(self) -> dict:
        per_class = {
            name: {"precision": float(p), "recall": float(r), "f1": float(f),
                   "support": int(s)}
            for name, p, r, f, s in zip(self.class_names, self.precision, self.recall,
                                        self.f1, self.support)
        }
        return {"accuracy": self.accuracy, "per_class": per_class,
                "macro_avg": dict(self.macro), "weighted_avg": dict(self.weighted),
                "confusion_matrix": self.confusion.tolist(),
                "classes": list(self.class_names)}


def metrics_from_confusion(cm, class_names=None) -> Metrics:
    """Summaries of a confusion matrix.

    Precision is 0 for a class never predicted, recall is 0 for a class with
    no support, and F1 is 0 when precision and recall are both 0. Macro
    averages weigh classes equally; weighted averages use true-class support.
    """
    cm = np.asarray(cm, dtype=np.int64)
    if cm.ndim != 2 or cm.shape[0] != cm.shape[1]:
        raise ShapeMismatch(f"confusion matrix must be square, got {cm.shape}")
    K = cm.shape[0]
    names = tuple(class_names) if class_names is not None else tuple(str(i) for i in range(K))
    if len(names) != K:
        raise ShapeMismatch(f"{len(names)} class names for {K} classes")
    tp = np.diag(cm).astype(np.float64)
    support = cm.sum(axis=1)
    total = int(cm.sum())
    precision = _safe_ratio(tp, cm.sum(axis=0))
    recall = _safe_ratio(tp, support)
    f1 = _safe_ratio(2 * precision * recall, precision + recall)
    accuracy = float(tp.sum() / total) if total else 0.0
    w = support / total if total else np.zeros(K)
    macro = {"precision": float(precision.mean()), "recall": float(recall.mean()),
             "f1": float(f1.mean())}
    weighted = {"precision": float(w @ precision), "recall": float(w @ recall),
                "f1": float(w @ f1)}
    assert support.sum() == total
    return Metrics(accuracy, precision, recall, f1, support, macro, weighted, cm, names)


def evaluate_predictions(y_true, y_pred, n_classes: int, class_names=None) -> Metrics:
    cm = confusion_matrix(y_true, y_pred, n_classes)
    m = metrics_from_confusion(cm, class_names)
    y_true = np.asarray(y_true).ravel()
    if y_true.size:
        assert abs(m.accuracy - np.mean(y_true == np.asarray(y_pred).ravel())) < 1e-12
    return m
