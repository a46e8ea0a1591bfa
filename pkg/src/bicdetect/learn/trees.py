"""Single shallow trees with readable decision paths."""
from __future__ import annotations

import numpy as np

from .. import kernels


def fit_tree(X, y, max_depth=3, min_leaf=1, seed=0):
    """One CART tree (all features considered) as flat node arrays."""
    f = kernels.fit_forest(X, y, n_trees=1, max_depth=max_depth, min_leaf=min_leaf,
                           mtry=None, seed=seed, bootstrap=False)
    n = int(f["n_nodes"][0])
    return {k: f[k][0, :n] for k in ("feature", "threshold", "left", "right", "value")}


def tree_leaves(tree, X):
    stacked = {k: v[None, :] for k, v in tree.items()}
    return kernels.apply_forest(stacked, X)[:, 0]


def tree_predict(tree, X):
    return tree["value"][tree_leaves(tree, X)]


def decision_path(tree, x):
    """``[(feature, threshold, went_left), ...]`` from root to the leaf of dense row ``x``."""
    node = 0
    path = []
    while tree["feature"][node] >= 0:
        f = int(tree["feature"][node])
        t = float(tree["threshold"][node])
        go_left = x[f] <= t
        path.append((f, t, bool(go_left)))
        node = int(tree["left"][node] if go_left else tree["right"][node])
    return path, node
