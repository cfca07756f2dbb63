"""Ranking and threshold metrics for binary interaction scores."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy.stats import rankdata


class SingleClassOnly(ValueError):
    """AUC/AUPR are undefined when only one label value is present."""


@dataclass(frozen=True)
class EvalResult:
    auc: float
    aupr: float
    precision: float
    recall: float
    threshold: float = 0.5

    def to_dict(self) -> dict:
        return asdict(self)


def _check(scores, labels) -> tuple[np.ndarray, np.ndarray]:
    s = np.asarray(scores, dtype=np.float64).reshape(-1)
    y = np.asarray(labels).reshape(-1).astype(int)
    if s.shape != y.shape or s.size == 0:
        raise ValueError("scores and labels must be non-empty and the same length")
    if not np.isin(y, (0, 1)).all():
        raise ValueError("labels must be 0 or 1")
    n_pos = int(y.sum())
    if n_pos == 0 or n_pos == len(y):
        raise SingleClassOnly("need both positive and negative labels")
    return s, y


def roc_auc(scores, labels) -> float:
    """Mann-Whitney statistic: fraction of positive/negative pairs ranked correctly, ties count 1/2."""
    s, y = _check(scores, labels)
    ranks = rankdata(s)  # average ranks give ties half credit
    n_pos = y.sum()
    n_neg = len(y) - n_pos
    return float((ranks[y == 1].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def average_precision(scores, labels) -> float:
    """Step-interpolated area under the precision-recall curve.

    Tied scores form a single threshold.
    """
    s, y = _check(scores, labels)
    order = np.argsort(-s, kind="mergesort")
    s, y = s[order], y[order]
    last_of_group = np.r_[np.diff(s) != 0, True]
    tp = np.cumsum(y)[last_of_group]
    seen = (np.arange(1, len(y) + 1))[last_of_group]
    precision = tp / seen
    recall = tp / y.sum()
    prev_recall = np.r_[0.0, recall[:-1]]
    return float(np.sum((recall - prev_recall) * precision))


def precision_recall_at(scores, labels, threshold: float = 0.5) -> tuple[float, float]:
    s = np.asarray(scores, dtype=np.float64).reshape(-1)
    y = np.asarray(labels).reshape(-1).astype(int)
    pred = s >= threshold
    tp = int(np.sum(pred & (y == 1)))
    n_pred = int(pred.sum())
    n_pos = int(y.sum())
    precision = tp / n_pred if n_pred else 0.0
    recall = tp / n_pos if n_pos else 0.0
    return precision, recall


def evaluate_scores(scores, labels, threshold: float = 0.5) -> EvalResult:
    p, r = precision_recall_at(scores, labels, threshold)
    return EvalResult(roc_auc(scores, labels), average_precision(scores, labels), p, r, threshold)
