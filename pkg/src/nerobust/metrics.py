"""Classification and ranking metrics used by the downstream tasks."""

from __future__ import annotations

import numpy as np
from scipy.stats import rankdata

from .graph import UndefinedStatisticError


def f1_scores(y_true, y_pred) -> tuple[float, float]:
    """(f1_micro, f1_macro) for single-label multiclass predictions.

    The macro average runs over every class seen in either ``y_true`` or
    ``y_pred``; a class that is never predicted (or never true) scores 0.
    """
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    if y_true.shape != y_pred.shape or y_true.ndim != 1:
        raise ValueError("y_true and y_pred must be 1-D arrays of equal length")
    if len(y_true) == 0:
        raise ValueError("empty label vectors")
    classes = np.union1d(y_true, y_pred)
    tp = np.array([np.sum((y_true == c) & (y_pred == c)) for c in classes], dtype=float)
    fp = np.array([np.sum((y_true != c) & (y_pred == c)) for c in classes], dtype=float)
    fn = np.array([np.sum((y_true == c) & (y_pred != c)) for c in classes], dtype=float)
    micro = 2 * tp.sum() / (2 * tp.sum() + fp.sum() + fn.sum())
    denom = 2 * tp + fp + fn
    per_class = np.divide(2 * tp, denom, out=np.zeros_like(tp), where=denom > 0)
    return float(micro), float(per_class.mean())


def _binary(scores, labels):
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise ValueError("scores and labels must be 1-D arrays of equal length")
    if not np.all(np.isin(labels, (0, 1))):
        raise ValueError("labels must be binary (0/1)")
    return scores, labels.astype(bool)


def auc(scores, labels) -> float:
    """ROC AUC as P(score of a random positive > score of a random negative), ties count 1/2."""
    scores, pos = _binary(scores, labels)
    n_pos = int(pos.sum())
    n_neg = len(pos) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedStatisticError("AUC needs both positive and negative examples")
    ranks = rankdata(scores)  # average ranks handle ties
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def average_precision(scores, labels) -> float:
    """Step-wise AP: mean precision at the rank of every positive.

    Items are ranked by descending score; equal scores keep their input order.
    """
    scores, pos = _binary(scores, labels)
    n_pos = int(pos.sum())
    if n_pos == 0:
        raise UndefinedStatisticError("average precision needs at least one positive")
    order = np.argsort(-scores, kind="stable")
    hits = pos[order]
    precision = np.cumsum(hits) / np.arange(1, len(hits) + 1)
    return float(precision[hits].sum() / n_pos)


def misclassification_rate(y_true, y_pred) -> float:
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    if len(y_true) == 0:
        raise ValueError("empty label vectors")
    return float(np.mean(y_true != y_pred))
