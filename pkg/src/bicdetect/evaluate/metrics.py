"""Confusion counts, precision/recall/F1 and rank-based AUC."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import LengthMismatch, SingleClassAUC, ValidationError


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self):
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True)
class EvalRow:
    project: str
    combo: str
    model: str
    precision: float
    recall: float
    f1: float
    auc: float | None
    confusion: ConfusionCounts
    flags: tuple = ()
    extra: dict = field(default_factory=dict, hash=False, compare=False)

    def metric(self, name):
        return getattr(self, name)


def _binary(v, what):
    v = np.asarray(v)
    if v.ndim != 1:
        raise ValidationError(f"{what} must be a vector")
    if not np.all((v == 0) | (v == 1)):
        raise ValidationError(f"{what} must hold only 0/1")
    return v.astype(np.int64)


def confusion(labels, predictions):
    y = _binary(labels, "labels")
    p = _binary(predictions, "predictions")
    if y.shape != p.shape:
        raise LengthMismatch(f"{y.shape[0]} labels vs {p.shape[0]} predictions")
    return ConfusionCounts(
        tp=int(np.sum((y == 1) & (p == 1))),
        fp=int(np.sum((y == 0) & (p == 1))),
        tn=int(np.sum((y == 0) & (p == 0))),
        fn=int(np.sum((y == 1) & (p == 0))),
    )


def midranks(values):
    """1-based ranks with tied values sharing the mean of their positions."""
    v = np.asarray(values, dtype=np.float64)
    order = np.argsort(v, kind="mergesort")
    sv = v[order]
    ranks = np.empty(v.shape[0], dtype=np.float64)
    # group boundaries of equal sorted values
    starts = np.flatnonzero(np.r_[True, sv[1:] != sv[:-1]])
    ends = np.r_[starts[1:], v.shape[0]]
    for s, e in zip(starts, ends):
        ranks[order[s:e]] = (s + 1 + e) / 2.0
    return ranks


def auc(labels, probabilities):
    """Mann-Whitney estimate of the ROC area; ties count one half."""
    y = _binary(labels, "labels")
    s = np.asarray(probabilities, dtype=np.float64)
    if y.shape != s.shape:
        raise LengthMismatch(f"{y.shape[0]} labels vs {s.shape[0]} scores")
    n1 = int(y.sum())
    n0 = y.shape[0] - n1
    if n1 == 0 or n0 == 0:
        raise SingleClassAUC("AUC needs both classes among the labels")
    r = midranks(s)
    u = r[y == 1].sum() - n1 * (n1 + 1) / 2.0
    return float(u / (n1 * n0))


def scores(counts):
    """Precision, recall, F1 and flags; undefined ratios are 0 and flagged."""
    flags = []
    if counts.tp + counts.fp == 0:
        precision = 0.0
        flags.append("precision_undefined")
    else:
        precision = counts.tp / (counts.tp + counts.fp)
    if counts.tp + counts.fn == 0:
        recall = 0.0
        flags.append("recall_undefined")
    else:
        recall = counts.tp / (counts.tp + counts.fn)
    f1 = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
    return precision, recall, f1, tuple(flags)


def metrics(labels, predictions, probabilities=None, project="", combo="", model=""):
    counts = confusion(labels, predictions)
    precision, recall, f1, flags = scores(counts)
    value = None
    if probabilities is not None:
        try:
            value = auc(labels, probabilities)
        except SingleClassAUC:
            flags = flags + ("auc_undefined",)
    return EvalRow(project, combo, model, precision, recall, f1, value, counts, flags)
