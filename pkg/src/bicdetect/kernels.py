"""Hot loops: tree growing, forest application, perceptron, sign enumeration.

Every kernel exists twice. The ``*_nb`` versions are numba-compiled loops
over CSR arrays; the ``*_np`` versions are vectorized numpy/scipy code.
Both consume the same splitmix64 stream in the same order and evaluate
split scores with the same floating-point operations, so on integer-valued
data they grow identical trees. The public wrappers pick a backend from
:mod:`bicdetect._accel` unless one is passed explicitly.
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from . import _accel
from ._accel import njit, prange

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
STREAM = 0xD1B54A32D192ED03
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB
_REL_EPS = 1e-12


def _use_numba(backend):
    if backend is None:
        return _accel.USE_NUMBA
    if backend not in ("numba", "numpy"):
        raise ValueError("backend must be 'numba' or 'numpy'")
    if backend == "numba" and _accel.numba is None:  # pragma: no cover
        raise RuntimeError("numba is not installed")
    return backend == "numba"


def as_csr(X):
    X = sp.csr_matrix(X, dtype=np.float64, copy=True)
    X.sum_duplicates()
    X.eliminate_zeros()
    X.sort_indices()
    X.indptr = X.indptr.astype(np.int64)
    X.indices = X.indices.astype(np.int64)
    return X


# -- splitmix64 ----------------------------------------------------------------

class SplitMix64:
    """Pure-python twin of the compiled generator."""

    def __init__(self, seed, stream=0):
        self.state = (int(seed) + int(stream) * STREAM) & MASK64

    def next(self):
        self.state = (self.state + GOLDEN) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * _M1) & MASK64
        z = ((z ^ (z >> 27)) * _M2) & MASK64
        return z ^ (z >> 31)

    def below(self, n):
        return self.next() % n


@njit
def _sm_next(state):
    state[0] += np.uint64(GOLDEN)
    z = state[0]
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_M1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_M2)
    return z ^ (z >> np.uint64(31))


@njit
def _sm_below(state, n):
    return np.int64(_sm_next(state) % np.uint64(n))


@njit
def _sm_init(seed, stream):
    state = np.empty(1, dtype=np.uint64)
    state[0] = np.uint64(seed) + np.uint64(stream) * np.uint64(STREAM)
    return state


# -- tree growing: numba -----------------------------------------------------------

@njit
def _grow_tree_nb(indptr, indices, data, n_features, y, w, rows, max_depth, min_leaf,
                  mtry, state, feat, thr, left, right, value, imp):
    """Grow one tree over ``rows`` into preallocated node arrays; returns node count."""
    n_rows = rows.shape[0]
    perm = rows.copy()
    tmp = np.empty(n_rows, dtype=np.int64)
    cnt = np.zeros(n_features, dtype=np.int64)
    mn = np.zeros(n_features)
    mx = np.zeros(n_features)
    slot = np.full(n_features, -1, dtype=np.int64)
    touched = np.empty(n_features, dtype=np.int64)
    st_node = np.empty(n_rows * 2 + 1, dtype=np.int64)
    st_lo = np.empty(n_rows * 2 + 1, dtype=np.int64)
    st_hi = np.empty(n_rows * 2 + 1, dtype=np.int64)
    st_depth = np.empty(n_rows * 2 + 1, dtype=np.int64)
    top = 0
    st_node[0] = 0
    st_lo[0] = 0
    st_hi[0] = n_rows
    st_depth[0] = 0
    top = 1
    n_nodes = 1
    while top > 0:
        top -= 1
        node = st_node[top]
        lo = st_lo[top]
        hi = st_hi[top]
        depth = st_depth[top]
        nr = hi - lo
        W = 0.0
        S = 0.0
        ymin = np.inf
        ymax = -np.inf
        for q in range(lo, hi):
            r = perm[q]
            W += w[r]
            S += w[r] * y[r]
            if y[r] < ymin:
                ymin = y[r]
            if y[r] > ymax:
                ymax = y[r]
        value[node] = S / W
        feat[node] = -1
        if ymin == ymax or nr < 2 * min_leaf or (max_depth >= 0 and depth >= max_depth):
            continue
        # non-constant columns among the node's rows
        n_touched = 0
        for q in range(lo, hi):
            r = perm[q]
            for p in range(indptr[r], indptr[r + 1]):
                c = indices[p]
                v = data[p]
                if cnt[c] == 0:
                    touched[n_touched] = c
                    n_touched += 1
                    mn[c] = v
                    mx[c] = v
                else:
                    if v < mn[c]:
                        mn[c] = v
                    if v > mx[c]:
                        mx[c] = v
                cnt[c] += 1
        nc = np.empty(n_touched, dtype=np.int64)
        m = 0
        for i in range(n_touched):
            c = touched[i]
            if cnt[c] < nr or mn[c] != mx[c]:
                nc[m] = c
                m += 1
            cnt[c] = 0
        if m == 0:
            continue
        nc = np.sort(nc[:m])
        k = mtry if mtry < m else m
        for i in range(k):
            j = i + _sm_below(state, m - i)
            t = nc[i]
            nc[i] = nc[j]
            nc[j] = t
        for i in range(k):
            slot[nc[i]] = i
        buf = np.zeros((k, nr))
        for q in range(lo, hi):
            r = perm[q]
            for p in range(indptr[r], indptr[r + 1]):
                s = slot[indices[p]]
                if s >= 0:
                    buf[s, q - lo] = data[p]
        for i in range(k):
            slot[nc[i]] = -1
        best = -np.inf
        best_s = -1
        best_t = 0.0
        for s in range(k):
            vals = buf[s]
            order = np.argsort(vals, kind="mergesort")
            tw = 0.0
            ts = 0.0
            for q in range(nr):
                r = perm[lo + order[q]]
                tw += w[r]
                ts += w[r] * y[r]
            cw = 0.0
            cs = 0.0
            for q in range(nr - 1):
                r = perm[lo + order[q]]
                cw += w[r]
                cs += w[r] * y[r]
                a = vals[order[q]]
                b = vals[order[q + 1]]
                if a == b:
                    continue
                nl = q + 1
                if nl < min_leaf or nr - nl < min_leaf:
                    continue
                rw = tw - cw
                rs = ts - cs
                proxy = cs * cs / cw + rs * rs / rw
                if proxy > best:
                    best = proxy
                    best_s = s
                    mid = (a + b) / 2.0
                    best_t = a if mid == b else mid
        if best_s < 0:
            continue
        gain = best - S * S / W
        if not gain > _REL_EPS * abs(best):
            continue
        feat[node] = nc[best_s]
        thr[node] = best_t
        imp[nc[best_s]] += gain
        nl = 0
        nrt = 0
        for q in range(lo, hi):
            if buf[best_s, q - lo] <= best_t:
                tmp[nl] = perm[q]
                nl += 1
            else:
                tmp[nr - 1 - nrt] = perm[q]
                nrt += 1
        # stable: left block as is, right block reversed back into order
        for q in range(nl):
            perm[lo + q] = tmp[q]
        for q in range(nrt):
            perm[lo + nl + q] = tmp[nr - 1 - q]
        lc = n_nodes
        rc = n_nodes + 1
        n_nodes += 2
        left[node] = lc
        right[node] = rc
        st_node[top] = rc
        st_lo[top] = lo + nl
        st_hi[top] = hi
        st_depth[top] = depth + 1
        top += 1
        st_node[top] = lc
        st_lo[top] = lo
        st_hi[top] = lo + nl
        st_depth[top] = depth + 1
        top += 1
    return n_nodes


@njit(parallel=True)
def _forest_fit_nb(indptr, indices, data, n_features, y, sw, n_trees, max_depth, min_leaf,
                   mtry, seed, bootstrap):
    n = y.shape[0]
    cap = 2 * n + 1
    feat = np.full((n_trees, cap), -1, dtype=np.int64)
    thr = np.zeros((n_trees, cap))
    left = np.full((n_trees, cap), -1, dtype=np.int64)
    right = np.full((n_trees, cap), -1, dtype=np.int64)
    value = np.zeros((n_trees, cap))
    imp = np.zeros((n_trees, n_features))
    n_nodes = np.zeros(n_trees, dtype=np.int64)
    for t in prange(n_trees):
        state = _sm_init(seed, t)
        w = sw.copy()
        if bootstrap:
            counts = np.zeros(n)
            for _ in range(n):
                counts[_sm_below(state, n)] += 1.0
            for i in range(n):
                w[i] = sw[i] * counts[i]
        m = 0
        for i in range(n):
            if w[i] > 0:
                m += 1
        rows = np.empty(m, dtype=np.int64)
        m = 0
        for i in range(n):
            if w[i] > 0:
                rows[m] = i
                m += 1
        n_nodes[t] = _grow_tree_nb(indptr, indices, data, n_features, y, w, rows, max_depth,
                                   min_leaf, mtry, state, feat[t], thr[t], left[t], right[t],
                                   value[t], imp[t])
    return feat, thr, left, right, value, n_nodes, imp


# -- tree growing: numpy -----------------------------------------------------------

def _grow_tree_np(X, y, w, rows, max_depth, min_leaf, mtry, rng, cap):
    n_features = X.shape[1]
    feat = np.full(cap, -1, dtype=np.int64)
    thr = np.zeros(cap)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    value = np.zeros(cap)
    imp = np.zeros(n_features)
    wy = w * y
    stack = [(0, rows, 0)]
    n_nodes = 1
    while stack:
        node, seg, depth = stack.pop()
        nr = seg.shape[0]
        W = np.cumsum(w[seg])[-1]
        S = np.cumsum(wy[seg])[-1]
        value[node] = S / W
        ys = y[seg]
        if ys.min() == ys.max() or nr < 2 * min_leaf or (max_depth >= 0 and depth >= max_depth):
            continue
        sub = X[seg]
        nz = np.bincount(sub.indices, minlength=n_features)
        mn = np.full(n_features, np.inf)
        mx = np.full(n_features, -np.inf)
        np.minimum.at(mn, sub.indices, sub.data)
        np.maximum.at(mx, sub.indices, sub.data)
        nc = np.flatnonzero((nz > 0) & ((nz < nr) | (mn != mx)))
        m = nc.shape[0]
        if m == 0:
            continue
        k = min(mtry, m)
        for i in range(k):
            j = i + rng.below(m - i)
            nc[i], nc[j] = nc[j], nc[i]
        chosen = nc[:k]
        B = sub[:, chosen].toarray()
        order = np.argsort(B, axis=0, kind="stable")
        V = np.take_along_axis(B, order, axis=0)
        cw = np.cumsum(w[seg][order], axis=0)
        cs = np.cumsum(wy[seg][order], axis=0)
        tw, ts = cw[-1], cs[-1]
        cw, cs = cw[:-1], cs[:-1]
        rw = tw - cw
        rs = ts - cs
        with np.errstate(divide="ignore", invalid="ignore"):
            proxy = cs * cs / cw + rs * rs / rw
        nl = np.arange(1, nr)[:, None]
        valid = (V[:-1] != V[1:]) & (nl >= min_leaf) & (nr - nl >= min_leaf)
        proxy = np.where(valid, proxy, -np.inf)
        flat = proxy.T.ravel()
        if flat.size == 0:
            continue
        pos = int(np.argmax(flat))
        best = flat[pos]
        if best == -np.inf:
            continue
        s, q = divmod(pos, nr - 1)
        gain = best - S * S / W
        if not gain > _REL_EPS * abs(best):
            continue
        a, b = V[q, s], V[q + 1, s]
        mid = (a + b) / 2.0
        t = a if mid == b else mid
        feat[node] = chosen[s]
        thr[node] = t
        imp[chosen[s]] += gain
        goes_left = B[:, s] <= t
        lc, rc = n_nodes, n_nodes + 1
        n_nodes += 2
        left[node], right[node] = lc, rc
        stack.append((rc, seg[~goes_left], depth + 1))
        stack.append((lc, seg[goes_left], depth + 1))
    return feat, thr, left, right, value, n_nodes, imp


def _forest_fit_np(X, y, sw, n_trees, max_depth, min_leaf, mtry, seed, bootstrap):
    n = y.shape[0]
    cap = 2 * n + 1
    out = [np.full((n_trees, cap), -1, dtype=np.int64), np.zeros((n_trees, cap)),
           np.full((n_trees, cap), -1, dtype=np.int64), np.full((n_trees, cap), -1, dtype=np.int64),
           np.zeros((n_trees, cap))]
    n_nodes = np.zeros(n_trees, dtype=np.int64)
    imp = np.zeros((n_trees, X.shape[1]))
    for t in range(n_trees):
        rng = SplitMix64(seed, t)
        w = sw.copy()
        if bootstrap:
            counts = np.zeros(n)
            for _ in range(n):
                counts[rng.below(n)] += 1.0
            w = sw * counts
        rows = np.flatnonzero(w > 0)
        res = _grow_tree_np(X, y, w, rows, max_depth, min_leaf, mtry, rng, cap)
        for arr, r in zip(out, res[:5]):
            arr[t] = r
        n_nodes[t] = res[5]
        imp[t] = res[6]
    return (*out, n_nodes, imp)


def fit_forest(X, y, sample_weight=None, n_trees=100, max_depth=-1, min_leaf=1, mtry=None,
               seed=0, bootstrap=True, backend=None):
    """Grow ``n_trees`` regression trees on ``y`` (SSE criterion).

    Returns a dict of node arrays, each ``(n_trees, capacity)``, plus per-tree
    node counts and raw (unnormalized) impurity-decrease importances.
    """
    X = as_csr(X)
    y = np.ascontiguousarray(y, dtype=np.float64)
    n, n_features = X.shape
    sw = np.ones(n) if sample_weight is None else np.ascontiguousarray(sample_weight, dtype=np.float64)
    mtry = n_features if mtry is None else max(1, int(mtry))
    max_depth = -1 if max_depth is None else int(max_depth)
    if _use_numba(backend):
        res = _forest_fit_nb(X.indptr, X.indices, X.data, n_features, y, sw, int(n_trees),
                             max_depth, int(min_leaf), mtry, int(seed), bool(bootstrap))
    else:
        res = _forest_fit_np(X, y, sw, int(n_trees), max_depth, int(min_leaf), mtry, int(seed),
                             bool(bootstrap))
    keys = ("feature", "threshold", "left", "right", "value", "n_nodes", "importance")
    return dict(zip(keys, res))


# -- applying trees -----------------------------------------------------------

@njit(parallel=True)
def _forest_apply_nb(indptr, indices, data, n_features, feat, thr, left, right):
    n = indptr.shape[0] - 1
    n_trees = feat.shape[0]
    out = np.empty((n, n_trees), dtype=np.int64)
    for i in prange(n):
        row = np.zeros(n_features)
        for p in range(indptr[i], indptr[i + 1]):
            row[indices[p]] = data[p]
        for t in range(n_trees):
            node = 0
            while feat[t, node] >= 0:
                if row[feat[t, node]] <= thr[t, node]:
                    node = left[t, node]
                else:
                    node = right[t, node]
            out[i, t] = node
    return out


def _forest_apply_np(X, feat, thr, left, right):
    n = X.shape[0]
    n_trees = feat.shape[0]
    out = np.zeros((n, n_trees), dtype=np.int64)
    X = X.tocsc()
    for t in range(n_trees):
        node = np.zeros(n, dtype=np.int64)
        active = np.arange(n)
        while active.size:
            f = feat[t, node[active]]
            inner = f >= 0
            active = active[inner]
            if not active.size:
                break
            f = f[inner]
            vals = np.asarray(X[active, f]).ravel()
            go_left = vals <= thr[t, node[active]]
            node[active] = np.where(go_left, left[t, node[active]], right[t, node[active]])
        out[:, t] = node
    return out


def apply_forest(forest, X, backend=None):
    """Leaf node index reached by every row in every tree, ``(n_rows, n_trees)``."""
    X = as_csr(X)
    if _use_numba(backend):
        return _forest_apply_nb(X.indptr, X.indices, X.data, X.shape[1], forest["feature"],
                                forest["threshold"], forest["left"], forest["right"])
    return _forest_apply_np(X, forest["feature"], forest["threshold"], forest["left"], forest["right"])


# -- perceptron ------------------------------------------------------------------

@njit
def _perceptron_nb(indptr, indices, data, n_features, y, epochs, lr, seed):
    n = y.shape[0]
    w = np.zeros(n_features)
    b = 0.0
    best_w = w.copy()
    best_b = 0.0
    best_err = n + 1
    order = np.arange(n)
    state = _sm_init(seed, 0)
    ran = 0
    for ep in range(epochs):
        ran = ep + 1
        for i in range(n - 1, 0, -1):
            j = _sm_below(state, i + 1)
            t = order[i]
            order[i] = order[j]
            order[j] = t
        for q in range(n):
            i = order[q]
            m = b
            for p in range(indptr[i], indptr[i + 1]):
                m += w[indices[p]] * data[p]
            if y[i] * m <= 0:
                for p in range(indptr[i], indptr[i + 1]):
                    w[indices[p]] += lr * y[i] * data[p]
                b += lr * y[i]
        err = 0
        for i in range(n):
            m = b
            for p in range(indptr[i], indptr[i + 1]):
                m += w[indices[p]] * data[p]
            if y[i] * m <= 0:
                err += 1
        if err < best_err:
            best_err = err
            best_w[:] = w
            best_b = b
        if err == 0:
            break
    return best_w, best_b, best_err, ran


def _perceptron_np(X, y, epochs, lr, seed):
    n, n_features = X.shape
    w = np.zeros(n_features)
    b = 0.0
    best = (w.copy(), 0.0, n + 1)
    rng = SplitMix64(seed, 0)
    order = np.arange(n)
    rows = [(X.indices[X.indptr[i]:X.indptr[i + 1]], X.data[X.indptr[i]:X.indptr[i + 1]]) for i in range(n)]
    ran = 0
    for ep in range(epochs):
        ran = ep + 1
        for i in range(n - 1, 0, -1):
            j = rng.below(i + 1)
            order[i], order[j] = order[j], order[i]
        for i in order:
            idx, val = rows[i]
            if y[i] * (b + w[idx] @ val) <= 0:
                w[idx] += lr * y[i] * val
                b += lr * y[i]
        err = int(np.count_nonzero(y * (X @ w + b) <= 0))
        if err < best[2]:
            best = (w.copy(), b, err)
        if err == 0:
            break
    return best[0], best[1], best[2], ran


def perceptron_fit(X, y_pm, epochs=1000, lr=1.0, seed=0, backend=None):
    """Pocket perceptron on labels in {-1, +1}: weights with fewest training errors."""
    X = as_csr(X)
    y = np.ascontiguousarray(y_pm, dtype=np.float64)
    if _use_numba(backend):
        return _perceptron_nb(X.indptr, X.indices, X.data, X.shape[1], y, int(epochs), float(lr), int(seed))
    return _perceptron_np(X, y, int(epochs), float(lr), int(seed))


# -- signed-rank enumeration ---------------------------------------------------------

@njit
def _signed_rank_tail_nb(ranks, observed):
    n = ranks.shape[0]
    total = 0
    for i in range(n):
        total += ranks[i]
    target = abs(2 * observed - total)
    s = 0
    count = 1 if abs(2 * s - total) >= target else 0
    signs = np.zeros(n, dtype=np.int64)
    for g in range(1, 1 << n):
        # gray code: flip the lowest set bit position of g
        j = 0
        while (g >> j) & 1 == 0:
            j += 1
        if signs[j] == 0:
            signs[j] = 1
            s += ranks[j]
        else:
            signs[j] = 0
            s -= ranks[j]
        if abs(2 * s - total) >= target:
            count += 1
    return count


def _signed_rank_tail_np(ranks, observed):
    sums = np.zeros(1, dtype=np.int64)
    for r in ranks:
        sums = np.concatenate((sums, sums + int(r)))
    total = int(np.sum(ranks))
    return int(np.count_nonzero(np.abs(2 * sums - total) >= abs(2 * int(observed) - total)))


def signed_rank_tail_count(ranks, observed, backend=None):
    """Sign vectors whose positive-rank sum is at least as far from the mean as ``observed``.

    ``ranks`` are integers (doubled midranks) so the count is exact.
    """
    ranks = np.ascontiguousarray(ranks, dtype=np.int64)
    if ranks.shape[0] > 30:
        raise ValueError("exact enumeration limited to 30 ranks")
    if _use_numba(backend):
        return int(_signed_rank_tail_nb(ranks, np.int64(observed)))
    return _signed_rank_tail_np(ranks, observed)
