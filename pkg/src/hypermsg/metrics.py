"""Classification metrics computed from rank statistics."""

from __future__ import annotations

import numpy as np
from scipy.stats import rankdata

__all__ = ["accuracy", "roc_auc", "average_precision", "macro_roc_auc", "macro_average_precision"]


def accuracy(y_true, y_pred) -> float:
    y_true, y_pred = np.asarray(y_true), np.asarray(y_pred)
    if y_true.size == 0:
        return float("nan")
    return float(np.mean(y_true == y_pred))


def roc_auc(y_true, scores) -> float:
    """Area under the ROC curve via the Mann-Whitney statistic; tied scores share their average rank.

    NaN when only one class is present.
    """
    y = np.asarray(y_true).astype(bool).ravel()
    s = np.asarray(scores, dtype=np.float64).ravel()
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        return float("nan")
    ranks = rankdata(s)
    return float((ranks[y].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def average_precision(y_true, scores) -> float:
    """Sum over score thresholds of precision times recall increment; tied scores form one threshold."""
    y = np.asarray(y_true).astype(bool).ravel()
    s = np.asarray(scores, dtype=np.float64).ravel()
    n_pos = int(y.sum())
    if n_pos == 0:
        return float("nan")
    order = np.argsort(-s, kind="stable")
    s, y = s[order], y[order]
    # last index of each block of equal scores
    ends = np.r_[np.flatnonzero(np.diff(s)), s.size - 1]
    tp = np.cumsum(y)[ends]
    fp = (ends + 1) - tp
    precision = tp / (tp + fp)
    recall = tp / n_pos
    return float(np.sum(np.diff(np.r_[0.0, recall]) * precision))


def _macro(fn, Y, S):
    Y, S = np.asarray(Y), np.asarray(S, dtype=np.float64)
    vals = [fn(Y[:, k], S[:, k]) for k in range(Y.shape[1])]
    vals = [v for v in vals if not np.isnan(v)]
    return float(np.mean(vals)) if vals else float("nan")


def macro_roc_auc(Y, S) -> float:
    """Per-column AUC averaged over columns where it is defined."""
    return _macro(roc_auc, Y, S)


def macro_average_precision(Y, S) -> float:
    return _macro(average_precision, Y, S)
