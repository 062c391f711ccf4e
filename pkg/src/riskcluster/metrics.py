"""Confusion counts, ROC curves and AUC.

A case is predicted positive when its score is at or above the threshold.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, SingleClass, UndefinedRate


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    tn: int
    fn: int
    threshold: float

    @property
    def n(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True)
class RocCurve:
    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray  # first entry is +inf (nothing predicted positive)
    fp: np.ndarray  # integer counts behind fpr / tpr
    tp: np.ndarray
    n_pos: int
    n_neg: int

    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.fpr.tolist(), self.tpr.tolist()))


def _check(scores, labels) -> tuple[np.ndarray, np.ndarray]:
    scores = np.asarray(scores, dtype=float).ravel()
    labels = np.asarray(labels).ravel()
    if scores.shape != labels.shape:
        raise DimensionMismatch(f"{scores.shape[0]} scores for {labels.shape[0]} labels")
    if not np.all(np.isfinite(scores)):
        raise ValueError("scores must be finite")
    if not np.all((labels == 0) | (labels == 1)):
        raise ValueError("labels must be 0/1")
    return scores, labels.astype(int)


def confusion_at_threshold(scores, labels, t: float) -> ConfusionMatrix:
    scores, labels = _check(scores, labels)
    pred = scores >= t
    pos = labels == 1
    return ConfusionMatrix(
        tp=int(np.sum(pred & pos)),
        fp=int(np.sum(pred & ~pos)),
        tn=int(np.sum(~pred & ~pos)),
        fn=int(np.sum(~pred & pos)),
        threshold=float(t),
    )


def tpr(cm: ConfusionMatrix) -> float:
    if cm.tp + cm.fn == 0:
        raise UndefinedRate("no actual positives: TPR undefined")
    return cm.tp / (cm.tp + cm.fn)


def tnr(cm: ConfusionMatrix) -> float:
    if cm.tn + cm.fp == 0:
        raise UndefinedRate("no actual negatives: TNR undefined")
    return cm.tn / (cm.tn + cm.fp)


def roc_curve(scores, labels) -> RocCurve:
    """ROC points at every distinct score, highest first.

    Equal scores move together, so a tie block contributes one diagonal
    segment. The curve starts at (0, 0) for threshold +inf and ends at
    (1, 1) at the lowest score.
    """
    scores, labels = _check(scores, labels)
    n_pos = int(labels.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClass("ROC needs both classes")
    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    lab = labels[order]
    tp_cum = np.cumsum(lab)
    fp_cum = np.cumsum(1 - lab)
    last_of_block = np.r_[s[1:] != s[:-1], True]
    tp = np.r_[0, tp_cum[last_of_block]]
    fp = np.r_[0, fp_cum[last_of_block]]
    thresholds = np.r_[np.inf, s[last_of_block]]
    return RocCurve(fp / n_neg, tp / n_pos, thresholds, fp, tp, n_pos, n_neg)


def auc_trapezoid(curve: RocCurve) -> float:
    """Trapezoidal area under the ROC curve, summed in integer counts."""
    width = np.diff(curve.fp)
    height2 = curve.tp[1:] + curve.tp[:-1]
    twice_area = int(np.sum(width * height2))
    return twice_area / (2 * curve.n_pos * curve.n_neg)


def auc(scores, labels) -> float:
    return auc_trapezoid(roc_curve(scores, labels))


def auc_concordance(scores, labels, block: int = 2048) -> float:
    """Share of positive/negative pairs ranked correctly, ties counting one half.

    Counts pairs directly (blockwise), independent of any curve construction.
    """
    scores, labels = _check(scores, labels)
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    if len(pos) == 0 or len(neg) == 0:
        raise SingleClass("AUC needs both classes")
    greater = ties = 0
    for start in range(0, len(pos), block):
        chunk = pos[start : start + block, None]
        greater += int(np.sum(chunk > neg[None, :]))
        ties += int(np.sum(chunk == neg[None, :]))
    return (2 * greater + ties) / (2 * len(pos) * len(neg))


def youden_threshold(scores, labels) -> float:
    """Threshold maximizing TPR + TNR - 1 (ties: the higher threshold)."""
    curve = roc_curve(scores, labels)
    j = curve.tpr - curve.fpr
    best = int(np.argmax(j[1:])) + 1
    return float(curve.thresholds[best])
