"""Recursive feature elimination and greedy best-subset growth."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import (
    ConstantSeries,
    EstimatorWithoutImportances,
    ValidationError,
)
from .evaluate.metrics import confusion, scores
from .evaluate.stats import correlation
from .learn import ClassifierSpec, fit, predict

CRITERIA = ("f1", "precision", "recall")


@dataclass
class RankedFeatureList:
    ranks: np.ndarray  # rank of each column, 1 = most important
    steps: list = field(default_factory=list)

    def order(self):
        """Column indices from rank 1 downwards."""
        return np.argsort(self.ranks, kind="stable")


@dataclass
class SelectionResult:
    selected: list
    trace: list
    criterion: str
    score: float


def rfe_rank(X, y, estimator=None, step=1, coarse=False, coarse_floor=100):
    """Rank all columns by repeatedly refitting and dropping the weakest.

    Each round drops ``step`` columns (lowest importance first, higher
    column index first among equal importances) and gives them the worst
    ranks still free. With ``coarse`` the surviving count is halved per
    round until ``coarse_floor`` columns remain, then ``step`` applies.
    """
    estimator = estimator or ClassifierSpec("rf")
    if estimator.kind not in ("rf", "gbc"):
        raise EstimatorWithoutImportances(f"{estimator.kind} exposes no feature importances")
    if int(step) < 1:
        raise ValidationError("step must be a positive integer")
    X = sp.csr_matrix(X)
    n = X.shape[1]
    if n < 2:
        raise ValidationError("ranking needs at least two columns")
    Xc = X.tocsc()
    surviving = np.arange(n)
    ranks = np.zeros(n, dtype=np.int64)
    free = n
    steps = []
    while surviving.size > 1:
        m = surviving.size
        model = fit(estimator, Xc[:, surviving], y)
        imp = model.importances
        if coarse and m > coarse_floor:
            k = m - max(coarse_floor, m // 2)
        else:
            k = int(step)
        k = max(1, min(k, m - 1))
        order = np.lexsort((-surviving, imp))
        drop = order[:k]
        for j, pos in enumerate(drop):
            ranks[surviving[pos]] = free - j
        free -= k
        steps.append({"surviving": int(m), "dropped": [int(surviving[p]) for p in drop]})
        surviving = np.delete(surviving, drop)
    ranks[surviving[0]] = 1
    if sorted(ranks.tolist()) != list(range(1, n + 1)):  # pragma: no cover - invariant
        raise AssertionError("ranks are not a permutation")
    return RankedFeatureList(ranks, steps)


def _criterion_value(criterion, y_true, y_pred):
    p, r, f1, _ = scores(confusion(y_true, y_pred))
    return {"f1": f1, "precision": p, "recall": r}[criterion]


def _column_key(Xc, j):
    lo, hi = Xc.indptr[j], Xc.indptr[j + 1]
    return (Xc.indices[lo:hi].tobytes(), Xc.data[lo:hi].tobytes())


def greedy_forward_select(ranked, X_train, y_train, X_eval, y_eval, model=None, criterion="f1",
                          max_candidates=None):
    """Grow a subset in rank order, keeping a column only on strict improvement.

    A column identical (in both training and evaluation rows) to an accepted
    one is rejected without refitting.
    """
    if criterion not in CRITERIA:
        raise ValidationError(f"criterion must be one of {CRITERIA}")
    model = model or ClassifierSpec("rf")
    order = ranked.order() if isinstance(ranked, RankedFeatureList) else np.asarray(ranked)
    if max_candidates is not None:
        order = order[:int(max_candidates)]
    Xt = sp.csc_matrix(X_train)
    Xt.sort_indices()
    Xe = sp.csc_matrix(X_eval)
    Xe.sort_indices()
    if Xt.shape[1] != Xe.shape[1]:
        raise ValidationError("training and evaluation matrices differ in width")

    def evaluate(cols):
        trained = fit(model, Xt[:, cols], y_train)
        return _criterion_value(criterion, y_eval, predict(trained, Xe[:, cols]))

    first = int(order[0])
    selected = [first]
    seen = {(_column_key(Xt, first), _column_key(Xe, first))}
    best = evaluate(selected)
    trace = [{"candidate": first, "accepted": True, "value": best}]
    for c in order[1:]:
        c = int(c)
        key = (_column_key(Xt, c), _column_key(Xe, c))
        if key in seen:
            trace.append({"candidate": c, "accepted": False, "value": best, "reason": "duplicate"})
            continue
        value = evaluate(selected + [c])
        if value > best:
            selected.append(c)
            seen.add(key)
            best = value
            trace.append({"candidate": c, "accepted": True, "value": value})
        else:
            trace.append({"candidate": c, "accepted": False, "value": value})
    return SelectionResult(selected, trace, criterion, best)


def selection_split(n_train, eval_fraction=0.3):
    """Inner split of a time-ordered training partition: (fit rows, evaluation tail)."""
    n_eval = int(math.ceil(round(eval_fraction * n_train, 9)))
    n_eval = min(max(n_eval, 1), n_train - 1)
    idx = np.arange(n_train)
    return idx[:n_train - n_eval], idx[n_train - n_eval:]


def best_set_size_analysis(sizes, instance_counts):
    """Correlate best-subset size with dataset size.

    ``sizes`` maps a group name (namespace or combination) to
    ``{project: subset size}``; ``instance_counts`` maps project to row
    count. Undefined coefficients are reported with the reason.
    """
    report = {}
    for group, per_project in sorted(sizes.items()):
        projects = sorted(per_project)
        if len(projects) < 3:
            raise ValidationError(f"{group}: correlation needs at least 3 projects")
        xs = [per_project[p] for p in projects]
        ys = [instance_counts[p] for p in projects]
        entry = {"projects": projects, "sizes": xs, "instances": ys}
        for kind in ("pearson", "spearman"):
            try:
                res = correlation(xs, ys, kind)
            except ConstantSeries as exc:
                entry[kind] = {"defined": False, "reason": str(exc)}
            else:
                entry[kind] = {"defined": True, "coefficient": res.statistic, "p_value": res.p_value}
        report[group] = entry
    return report


def write_ranks_csv(ranked, vocabulary, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "namespace", "name", "rank"])
        for j, (ns, name) in enumerate(vocabulary.entries):
            w.writerow([j, ns, name, int(ranked.ranks[j])])


def read_ranks_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    return RankedFeatureList(np.array([int(r["rank"]) for r in rows], dtype=np.int64))


def write_trace_json(result, vocabulary, path):
    labels = vocabulary.labels
    doc = {
        "criterion": result.criterion,
        "score": result.score,
        "selected": [{"index": c, "feature": labels[c]} for c in result.selected],
        "trace": [dict(t, feature=labels[t["candidate"]]) for t in result.trace],
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def read_trace_json(path):
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    return SelectionResult([s["index"] for s in doc["selected"]], doc["trace"], doc["criterion"], doc["score"])
