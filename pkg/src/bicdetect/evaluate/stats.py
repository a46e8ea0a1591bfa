"""Wilcoxon signed-rank test and Pearson/Spearman correlation."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as _st

from .. import kernels
from ..errors import AllZeroDifferences, ConstantSeries, LengthMismatch, ValidationError
from .metrics import midranks

EXACT_MAX_N = 20
TIE_DECIMALS = 12


@dataclass(frozen=True)
class StatTestResult:
    test: str
    statistic: float
    p_value: float
    n: int
    details: dict = field(default_factory=dict, compare=False, hash=False)


def wilcoxon_signed_rank(differences, exact_max_n=EXACT_MAX_N):
    """Two-sided signed-rank test on paired differences.

    Zeros are dropped. Absolute differences are compared after rounding to
    12 decimals so that float noise does not split ties. For up to
    ``exact_max_n`` non-zero differences the p-value is exact (all sign
    assignments enumerated); above that a tie-corrected normal
    approximation without continuity correction is used. The statistic is
    min(W+, W-).
    """
    d = np.asarray(differences, dtype=np.float64).ravel()
    if not np.all(np.isfinite(d)):
        raise ValidationError("differences must be finite")
    d = d[d != 0]
    n = d.shape[0]
    if n == 0:
        raise AllZeroDifferences("every paired difference is zero")
    ranks = midranks(np.round(np.abs(d), TIE_DECIMALS))
    r2 = np.rint(2 * ranks).astype(np.int64)  # midranks are multiples of 1/2
    w_plus2 = int(r2[d > 0].sum())
    total2 = int(r2.sum())
    w_plus, w_minus = w_plus2 / 2.0, (total2 - w_plus2) / 2.0
    if n <= exact_max_n:
        count = kernels.signed_rank_tail_count(r2, w_plus2)
        p = count / float(1 << n)
        method = "exact"
        z = None
    else:
        mean = n * (n + 1) / 4.0
        _, tie_sizes = np.unique(r2, return_counts=True)
        var = n * (n + 1) * (2 * n + 1) / 24.0 - float(np.sum(tie_sizes ** 3 - tie_sizes)) / 48.0
        z = (w_plus - mean) / math.sqrt(var) if var > 0 else 0.0
        p = math.erfc(abs(z) / math.sqrt(2.0))
        method = "normal"
    return StatTestResult("wilcoxon", min(w_plus, w_minus), min(1.0, p), n,
                          {"method": method, "w_plus": w_plus, "w_minus": w_minus, "z": z})


def correlation(xs, ys, kind="pearson"):
    """Product-moment or rank correlation with a two-sided t-test p-value."""
    if kind not in ("pearson", "spearman"):
        raise ValidationError("kind must be pearson or spearman")
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.shape != y.shape:
        raise LengthMismatch(f"{x.shape[0]} vs {y.shape[0]} values")
    n = x.shape[0]
    if n < 3:
        raise ValidationError("correlation needs at least 3 pairs")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValidationError("values must be finite")
    if kind == "spearman":
        x, y = midranks(x), midranks(y)
    if np.all(x == x[0]) or np.all(y == y[0]):
        raise ConstantSeries(f"{kind} correlation is undefined for a constant series")
    dx = x - x.mean()
    dy = y - y.mean()
    r = float(np.sum(dx * dy) / math.sqrt(np.sum(dx * dx) * np.sum(dy * dy)))
    r = max(-1.0, min(1.0, r))
    df = n - 2
    if abs(r) == 1.0:
        p = 0.0
    else:
        t = r * math.sqrt(df / (1.0 - r * r))
        p = float(2.0 * _st.t.sf(abs(t), df))
    return StatTestResult(kind, r, min(1.0, p), n)
