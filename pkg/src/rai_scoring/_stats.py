"""Small numeric helpers: correlations with a zero-variance convention, F1."""

from __future__ import annotations

import numpy as np
from scipy.stats import rankdata

# Relative variance floor below which a vector counts as constant.
_FLAT = 1e-12


def _is_flat(v: np.ndarray) -> bool:
    scale = max(float(np.max(np.abs(v))), 1.0) if v.size else 1.0
    return v.size < 2 or float(np.std(v)) <= _FLAT * scale


def pearson(a, b) -> tuple[float, bool]:
    """Pearson correlation; returns ``(0.0, True)`` when either side is constant."""
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if _is_flat(a) or _is_flat(b):
        return 0.0, True
    a = a - a.mean()
    b = b - b.mean()
    r = float(a @ b / np.sqrt((a @ a) * (b @ b)))
    return float(np.clip(r, -1.0, 1.0)), False


def spearman(a, b) -> tuple[float, bool]:
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if _is_flat(a) or _is_flat(b):
        return 0.0, True
    return pearson(rankdata(a), rankdata(b))


def f1_score(y_true, y_pred, positive: int = 1) -> float:
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    tp = int(np.sum((y_true == positive) & (y_pred == positive)))
    fp = int(np.sum((y_true != positive) & (y_pred == positive)))
    fn = int(np.sum((y_true == positive) & (y_pred != positive)))
    denom = 2 * tp + fp + fn
    return 2 * tp / denom if denom else 0.0


def classification_f1(y_true, y_pred, n_classes: int = 2) -> float:
    """F1 of the positive class for binary tasks, macro F1 otherwise.

    When the reference labels contain a single class, that class is scored.
    """
    y_true = np.asarray(y_true)
    present = np.unique(y_true)
    if present.size == 1:
        return f1_score(y_true, y_pred, positive=int(present[0]))
    if n_classes == 2:
        return f1_score(y_true, y_pred, positive=1)
    return float(np.mean([f1_score(y_true, y_pred, positive=c) for c in range(n_classes)]))
