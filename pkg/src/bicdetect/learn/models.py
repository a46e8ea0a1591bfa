"""Fitting and prediction for the four classifier kinds."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .. import kernels
from ..errors import DataError, DegenerateLabels, NonFiniteFeature, ShapeMismatch, ValidationError
from .spec import ClassifierSpec

FORMAT = "bicdetect-model"
FORMAT_VERSION = 1
_SEED_MASK = (1 << 63) - 1


@dataclass
class TrainedModel:
    spec: ClassifierSpec
    n_features: int
    state: dict
    importances: np.ndarray | None = None

    @property
    def kind(self):
        return self.spec.kind


def _check_xy(X, y):
    X = kernels.as_csr(X)
    y = np.asarray(y)
    if X.shape[0] != y.shape[0]:
        raise ShapeMismatch(f"{X.shape[0]} rows but {y.shape[0]} labels")
    if not np.all(np.isfinite(X.data)):
        raise NonFiniteFeature("feature matrix holds NaN or infinite values")
    if not np.all((y == 0) | (y == 1)):
        raise ValidationError("labels must be 0/1")
    y = y.astype(np.int64)
    if y.size == 0 or y.min() == y.max():
        raise DegenerateLabels("training labels contain a single class")
    return X, y


def _sigmoid(z):
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    e = np.exp(z[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def _trim(forest):
    cap = int(forest["n_nodes"].max())
    return {k: forest[k][:, :cap] for k in ("feature", "threshold", "left", "right", "value")}


def _normalized(imp):
    imp = np.asarray(imp, dtype=np.float64)
    total = imp.sum()
    if total <= 0:
        return np.full(imp.shape[0], 1.0 / imp.shape[0])
    return imp / total


# -- random forest ---------------------------------------------------------------

def _mtry(spec, n_features):
    mf = spec.params.get("max_features", "sqrt")
    if mf == "sqrt":
        return max(1, int(math.sqrt(n_features)))
    if mf == "all":
        return n_features
    return min(int(mf), n_features)


def _fit_rf(spec, X, y):
    p = spec.params
    forest = kernels.fit_forest(X, y, n_trees=p["n_trees"], max_depth=p["max_depth"],
                                min_leaf=p["min_leaf"], mtry=_mtry(spec, X.shape[1]),
                                seed=spec.seed, bootstrap=True)
    per_tree = np.array([_normalized(row) if row.sum() > 0 else np.zeros_like(row)
                         for row in forest["importance"]])
    imp = per_tree.mean(axis=0)
    return _trim(forest), _normalized(imp)


def _proba_rf(state, X):
    leaves = kernels.apply_forest(state, X)
    vals = state["value"][np.arange(leaves.shape[1])[None, :], leaves]
    # hard vote: each tree casts the class its leaf leans to
    return (vals >= 0.5).mean(axis=1)


# -- gradient boosting -----------------------------------------------------------

def _fit_gbc(spec, X, y):
    p = spec.params
    n = X.shape[0]
    prior = y.mean()
    f0 = math.log(prior / (1.0 - prior))
    F = np.full(n, f0)
    stages = []
    imp = np.zeros(X.shape[1])
    for m in range(p["n_stages"]):
        prob = _sigmoid(F)
        resid = y - prob
        seed = (spec.seed + (m + 1) * kernels.GOLDEN) & _SEED_MASK
        tree = kernels.fit_forest(X, resid, n_trees=1, max_depth=p["max_depth"], min_leaf=1,
                                  mtry=None, seed=seed, bootstrap=False)
        tree = _trim(tree) | {"importance": tree["importance"]}
        leaves = kernels.apply_forest(tree, X)[:, 0]
        # one Newton step per leaf for the binomial deviance
        num = np.bincount(leaves, weights=resid, minlength=tree["value"].shape[1])
        den = np.bincount(leaves, weights=prob * (1.0 - prob), minlength=tree["value"].shape[1])
        gamma = np.where(np.abs(den) < 1e-150, 0.0, num / np.where(den == 0, 1.0, den))
        tree["value"] = gamma[None, :]
        F += p["learning_rate"] * gamma[leaves]
        imp += tree.pop("importance")[0]
        stages.append(tree)
    cap = max(t["value"].shape[1] for t in stages)

    def stack(key, fill):
        out = np.full((len(stages), cap), fill, dtype=stages[0][key].dtype)
        for i, t in enumerate(stages):
            out[i, :t[key].shape[1]] = t[key][0]
        return out

    state = {"feature": stack("feature", -1), "threshold": stack("threshold", 0.0),
             "left": stack("left", -1), "right": stack("right", -1), "value": stack("value", 0.0),
             "init": f0}
    return state, _normalized(imp)


def _proba_gbc(state, X, learning_rate):
    leaves = kernels.apply_forest(state, X)
    vals = state["value"][np.arange(leaves.shape[1])[None, :], leaves]
    return _sigmoid(state["init"] + learning_rate * vals.sum(axis=1))


# -- nearest neighbours ----------------------------------------------------------

def _distances(A, B, metric):
    """Pairwise distances between rows of ``A`` (queries) and ``B`` (training)."""
    dots = (A @ B.T).toarray()
    a2 = np.asarray(A.multiply(A).sum(axis=1)).ravel()
    b2 = np.asarray(B.multiply(B).sum(axis=1)).ravel()
    if metric == "euclidean":
        return np.sqrt(np.maximum(a2[:, None] + b2[None, :] - 2.0 * dots, 0.0))
    na, nb = np.sqrt(a2), np.sqrt(b2)
    denom = na[:, None] * nb[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        sim = np.where(denom > 0, dots / np.where(denom > 0, denom, 1.0), 0.0)
    d = 1.0 - np.clip(sim, -1.0, 1.0)
    both_zero = (na[:, None] == 0) & (nb[None, :] == 0)
    return np.where(both_zero, 0.0, d)


def _proba_knn(state, X, k, metric):
    train = state["X"]
    y = state["y"]
    d = _distances(X, train, metric)
    k = min(k, train.shape[0])
    kth = np.partition(d, k - 1, axis=1)[:, k - 1]
    # every neighbour tied with the k-th distance takes part in the vote
    inside = d <= kth[:, None] * (1.0 + 1e-12) + 1e-12
    return (inside * y[None, :]).sum(axis=1) / inside.sum(axis=1)


# -- perceptron ------------------------------------------------------------------

def _fit_pct(spec, X, y):
    w, b, err, ran = kernels.perceptron_fit(X, 2.0 * y - 1.0, epochs=spec.params["epochs"],
                                            lr=spec.params["learning_rate"], seed=spec.seed)
    return {"w": w, "b": float(b), "train_errors": int(err), "epochs_run": int(ran)}


# -- public interface --------------------------------------------------------------

def fit(spec, X, y):
    """Fit ``spec`` on a (sparse) matrix and 0/1 labels."""
    X, y = _check_xy(X, y)
    yf = y.astype(np.float64)
    imp = None
    if spec.kind == "rf":
        state, imp = _fit_rf(spec, X, yf)
    elif spec.kind == "gbc":
        state, imp = _fit_gbc(spec, X, yf)
    elif spec.kind == "knn":
        state = {"X": X, "y": yf}
    else:
        state = _fit_pct(spec, X, yf)
    return TrainedModel(spec, X.shape[1], state, imp)


def predict_proba(model, X):
    X = kernels.as_csr(X)
    if X.shape[1] != model.n_features:
        raise ShapeMismatch(f"model expects {model.n_features} columns, got {X.shape[1]}")
    if not np.all(np.isfinite(X.data)):
        raise NonFiniteFeature("feature matrix holds NaN or infinite values")
    if X.shape[0] == 0:
        return np.zeros(0)
    s = model.state
    if model.kind == "rf":
        return _proba_rf(s, X)
    if model.kind == "gbc":
        return _proba_gbc(s, X, model.spec.params["learning_rate"])
    if model.kind == "knn":
        return _proba_knn(s, X, model.spec.params["k"], model.spec.params["distance"])
    return _sigmoid(X @ s["w"] + s["b"])


def predict(model, X):
    """0/1 predictions; probability exactly 0.5 goes to class 1."""
    return (predict_proba(model, X) >= 0.5).astype(np.int64)


# -- persistence -------------------------------------------------------------------

def _encode(v):
    if isinstance(v, sp.spmatrix):
        v = v.tocsr()
        return {"__csr__": True, "shape": list(v.shape), "indptr": v.indptr.tolist(),
                "indices": v.indices.tolist(), "data": v.data.tolist()}
    if isinstance(v, np.ndarray):
        return {"__array__": True, "dtype": str(v.dtype), "shape": list(v.shape), "data": v.ravel().tolist()}
    return v


def _decode(v):
    if isinstance(v, dict) and v.get("__csr__"):
        return sp.csr_matrix((np.array(v["data"], dtype=np.float64), np.array(v["indices"], dtype=np.int64),
                              np.array(v["indptr"], dtype=np.int64)), shape=tuple(v["shape"]))
    if isinstance(v, dict) and v.get("__array__"):
        return np.array(v["data"], dtype=v["dtype"]).reshape(v["shape"])
    return v


def save_model(model, path):
    doc = {
        "format": FORMAT,
        "version": FORMAT_VERSION,
        "spec": model.spec.to_dict(),
        "n_features": model.n_features,
        "state": {k: _encode(v) for k, v in model.state.items()},
        "importances": None if model.importances is None else model.importances.tolist(),
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True), encoding="utf-8")


def load_model(path):
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("format") != FORMAT:
        raise DataError(f"{path}: not a saved model")
    if doc.get("version") != FORMAT_VERSION:
        raise DataError(f"{path}: model format version {doc.get('version')} is not supported")
    imp = doc.get("importances")
    state = {k: _decode(v) for k, v in doc["state"].items()}
    if "X" in state:
        state["X"] = kernels.as_csr(state["X"])
    return TrainedModel(ClassifierSpec.from_dict(doc["spec"]), int(doc["n_features"]), state,
                        None if imp is None else np.array(imp, dtype=np.float64))


def load_external_predictions(path, commit_ids=None):
    """Probabilities from another tool as ``commit_id,proba`` rows."""
    out = {}
    with open(path, newline="", encoding="utf-8-sig") as fh:
        reader = csv.DictReader(fh)
        if not reader.fieldnames or not {"commit_id", "proba"} <= set(reader.fieldnames):
            raise DataError(f"{path}: need commit_id and proba columns")
        for lineno, row in enumerate(reader, start=2):
            try:
                p = float(row["proba"])
            except ValueError:
                raise DataError(f"{path}:{lineno}: proba {row['proba']!r} is not a number") from None
            if not (math.isfinite(p) and 0.0 <= p <= 1.0):
                raise DataError(f"{path}:{lineno}: proba {p} outside [0, 1]")
            out[row["commit_id"].strip()] = p
    if commit_ids is not None:
        missing = [c for c in commit_ids if c not in out]
        if missing:
            raise DataError(f"{path}: no prediction for {missing[:5]}")
        return np.array([out[c] for c in commit_ids])
    return out
