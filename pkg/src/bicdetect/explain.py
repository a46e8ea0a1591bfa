"""Local rule explanations from a shallow surrogate tree.

A neighbourhood is sampled around the instance by mixing it, feature by
feature, with its nearest training rows from both predicted classes. The
model labels the neighbourhood, a depth-limited tree is fit to those
labels, and the instance's root-to-leaf path becomes a list of interval
conditions ``lower < feature <= upper``.
"""
from __future__ import annotations

import json
import math
import warnings
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import LowFidelity, ValidationError
from .learn import TrainedModel, decision_path, fit_tree, predict_proba, tree_predict

SUPPORTS_BUGGY = "supports_buggy"
SUPPORTS_CLEAN = "supports_clean"


@dataclass(frozen=True)
class RuleCondition:
    column: int
    feature: tuple  # (namespace, name)
    lower: float
    upper: float
    direction: str

    def holds(self, value):
        return self.lower < value <= self.upper

    def text(self, digits=2):
        name = self.feature[1] if self.feature[0] else str(self.feature)
        lo = "" if math.isinf(self.lower) else f"{self.lower:.{digits}f} < "
        hi = "" if math.isinf(self.upper) else f" <= {self.upper:.{digits}f}"
        if not lo and not hi:
            return f"{name} (any)"
        if lo and not hi:
            return f"{name} > {self.lower:.{digits}f}"
        return f"{lo}{name}{hi}"


@dataclass
class Explanation:
    commit_id: str
    rules: list
    fidelity: float
    predicted: int
    flags: tuple = ()
    details: dict = field(default_factory=dict)


def _model_proba(model, X):
    if isinstance(model, TrainedModel):
        return predict_proba(model, X)
    if hasattr(model, "predict_proba"):
        return np.asarray(model.predict_proba(X), dtype=np.float64)
    return np.asarray(model(X), dtype=np.float64)


def _dense_row(x, width):
    if sp.issparse(x):
        x = x.toarray()
    x = np.asarray(x, dtype=np.float64).ravel()
    if x.shape[0] != width:
        raise ValidationError(f"instance has {x.shape[0]} values, training matrix {width}")
    return x


def explain_instance(model, instance, X_train, n_synthetic=500, seed=0, *, vocabulary=None,
                     n_neighbors=10, max_depth=3, fidelity_floor=0.8, count_columns=None,
                     commit_id=""):
    """Explain one prediction with interval rules from a local surrogate tree.

    ``count_columns`` marks columns whose synthetic values are rounded to
    integers; by default these are the ts/tp columns of ``vocabulary``.
    A fidelity under ``fidelity_floor`` emits :class:`LowFidelity` and sets
    the ``low_fidelity`` flag; the explanation is still returned.
    """
    X_train = sp.csr_matrix(X_train, dtype=np.float64)
    n_train, width = X_train.shape
    if n_train == 0:
        raise ValidationError("training matrix is empty")
    x = _dense_row(instance, width)
    if count_columns is None:
        if vocabulary is not None:
            count_columns = np.array([ns in ("ts", "tp") for ns, _ in vocabulary.entries])
        else:
            count_columns = np.zeros(width, dtype=bool)
    count_columns = np.asarray(count_columns, dtype=bool)
    rng = np.random.default_rng(seed)

    x_proba = float(_model_proba(model, sp.csr_matrix(x[None, :]))[0])
    predicted = int(x_proba >= 0.5)
    train_pred = (_model_proba(model, X_train) >= 0.5).astype(np.int64)

    # nearest training rows of each predicted class
    d2 = np.asarray(X_train.multiply(X_train).sum(axis=1)).ravel() - 2.0 * (X_train @ x) + x @ x
    picked = []
    for cls in (0, 1):
        idx = np.flatnonzero(train_pred == cls)
        if idx.size:
            near = idx[np.lexsort((idx, d2[idx]))][:n_neighbors]
            picked.extend(near.tolist())
    neighbours = X_train[sorted(picked)].toarray()
    support = np.flatnonzero((x != 0) | np.any(neighbours != 0, axis=0))
    if support.size == 0:
        support = np.arange(min(width, 1))

    xs = x[support]
    nb = neighbours[:, support]
    which = rng.integers(0, nb.shape[0], size=n_synthetic)
    alpha = rng.random((n_synthetic, support.size))
    Z = xs[None, :] + alpha * (nb[which] - xs[None, :])
    rounded = count_columns[support]
    Z[:, rounded] = np.rint(Z[:, rounded])
    Z = np.vstack([xs[None, :], nb, Z])

    full = sp.csr_matrix((Z.shape[0], width))
    full = sp.lil_matrix(full)
    full[:, support] = Z
    labels = (_model_proba(model, full.tocsr()) >= 0.5).astype(np.float64)

    tree = fit_tree(Z, labels, max_depth=max_depth, seed=seed)
    surrogate = (tree_predict(tree, Z) >= 0.5).astype(np.float64)
    fidelity = float(np.mean(surrogate == labels))

    path, _leaf = decision_path(tree, xs)
    bounds = {}
    for f, t, went_left in path:
        lo, hi = bounds.get(f, (-math.inf, math.inf))
        if went_left:
            hi = min(hi, t)
        else:
            lo = max(lo, t)
        bounds[f] = (lo, hi)
    direction = SUPPORTS_BUGGY if predicted == 1 else SUPPORTS_CLEAN
    seen = []
    for f, _, _ in path:
        if f not in seen:
            seen.append(f)
    rules = []
    for f in seen:
        col = int(support[f])
        feat = vocabulary.entries[col] if vocabulary is not None else ("", f"x{col}")
        lo, hi = bounds[f]
        rules.append(RuleCondition(col, tuple(feat), lo, hi, direction))

    flags = []
    if not rules:
        flags.append("no_split")
    if fidelity < fidelity_floor:
        flags.append("low_fidelity")
        warnings.warn(f"surrogate fidelity {fidelity:.3f} below {fidelity_floor} for {commit_id or 'instance'}",
                      LowFidelity, stacklevel=2)
    return Explanation(commit_id, rules, fidelity, predicted, tuple(flags),
                       {"proba": x_proba, "neighbourhood": int(Z.shape[0]), "support": int(support.size)})


def aggregate_conditions(explanations, top_k=5, direction=SUPPORTS_BUGGY):
    """Per-namespace frequency ranking of the features used in rules.

    Ties in frequency break by feature name. Bounds of each entry are the
    medians of the contributing lowers and uppers.
    """
    buckets = defaultdict(list)
    for exp in explanations:
        for rule in exp.rules:
            if direction is None or rule.direction == direction:
                buckets[rule.feature].append(rule)
    by_ns = defaultdict(list)
    for feat, rules in buckets.items():
        lowers = np.array([r.lower for r in rules])
        uppers = np.array([r.upper for r in rules])
        by_ns[feat[0]].append({
            "feature": feat,
            "frequency": len(rules),
            "lower": float(np.median(lowers)),
            "upper": float(np.median(uppers)),
        })
    out = {}
    for ns, items in sorted(by_ns.items()):
        items.sort(key=lambda e: (-e["frequency"], e["feature"][1]))
        for rank, e in enumerate(items[:top_k], start=1):
            e["rank"] = rank
        out[ns] = items[:top_k]
    return out


def _bound(v):
    return None if math.isinf(v) else v


def explanation_dict(e):
    return {
        "predicted": e.predicted,
        "fidelity": e.fidelity,
        "flags": list(e.flags),
        "rules": [{"namespace": r.feature[0], "name": r.feature[1], "column": r.column,
                   "lower": _bound(r.lower), "upper": _bound(r.upper), "direction": r.direction,
                   "condition": r.text()} for r in e.rules],
    }


def write_explain_json(explanations, path):
    """``explanations`` is a list, or a mapping of group name to list."""
    if isinstance(explanations, dict):
        doc = {g: {e.commit_id: explanation_dict(e) for e in exps} for g, exps in explanations.items()}
    else:
        doc = {e.commit_id: explanation_dict(e) for e in explanations}
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def conditions_markdown(aggregated, title="Most frequent conditions", level=1):
    h = "#" * level
    out = [f"{h} {title}", ""]
    panels = [ns for ns in ("gs", "tp", "ts") if ns in aggregated] + \
             [ns for ns in aggregated if ns not in ("gs", "tp", "ts")]
    for ns in panels:
        out += [f"{h}# {ns.upper() or 'features'}", "", "| Rank | Condition | Frequency |", "|---|---|---|"]
        for e in aggregated[ns]:
            cond = RuleCondition(-1, e["feature"], e["lower"], e["upper"], SUPPORTS_BUGGY).text()
            out.append(f"| {e['rank']} | {cond} | {e['frequency']} |")
        out.append("")
    if not panels:
        out.append("No conditions: no commit was explained.")
    return "\n".join(out).rstrip() + "\n"
