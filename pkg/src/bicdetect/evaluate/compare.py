"""Paired comparison of feature combinations across projects."""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from itertools import combinations

from ..errors import AllZeroDifferences, UnpairedProjects
from .stats import wilcoxon_signed_rank

METRICS = ("precision", "recall", "f1", "auc")
COMBO_ORDER = ("GS-ALL", "GS", "TS", "TP", "GS+TS", "GS+TP", "TS+TP", "GS+TS+TP")


def combo_sort_key(combo):
    return (COMBO_ORDER.index(combo) if combo in COMBO_ORDER else len(COMBO_ORDER), combo)


@dataclass
class Comparison:
    baseline: str
    projects: list
    combos: list
    pairs: list = field(default_factory=list)
    improvements: list = field(default_factory=list)

    def pair(self, model, a, b, metric):
        for p in self.pairs:
            if (p["model"], p["a"], p["b"], p["metric"]) == (model, a, b, metric):
                return p
        raise KeyError((model, a, b, metric))


def _grid(rows):
    grid = defaultdict(dict)
    for r in rows:
        key = (r.model, r.combo)
        if r.project in grid[key]:
            raise UnpairedProjects(f"project {r.project} appears twice for {r.model}/{r.combo}")
        grid[key][r.project] = r
    return grid


def compare_combos(rows, baseline="GS", metrics=METRICS):
    """Wilcoxon test per (model, combo pair, metric) plus relative gains over ``baseline``.

    Differences are ``b - a`` with ``a`` before ``b`` in the canonical
    combination order, paired by project. Improvement is
    ``(value - baseline) / baseline`` per project.
    """
    grid = _grid(rows)
    models = sorted({m for m, _ in grid})
    projects = sorted({r.project for r in rows})
    combos = sorted({c for _, c in grid}, key=combo_sort_key)
    for key, cells in grid.items():
        if set(cells) != set(projects):
            missing = sorted(set(projects) - set(cells))
            raise UnpairedProjects(f"{key[0]}/{key[1]} lacks projects {missing}")
    out = Comparison(baseline, projects, combos)
    for model in models:
        present = [c for c in combos if (model, c) in grid]
        for a, b in combinations(present, 2):
            for metric in metrics:
                va = [grid[(model, a)][p].metric(metric) for p in projects]
                vb = [grid[(model, b)][p].metric(metric) for p in projects]
                entry = {"model": model, "a": a, "b": b, "metric": metric, "a_values": va, "b_values": vb}
                if any(v is None for v in va + vb):
                    entry.update(status="undefined", differences=None)
                    out.pairs.append(entry)
                    continue
                diffs = [y - x for x, y in zip(va, vb)]
                entry["differences"] = diffs
                try:
                    res = wilcoxon_signed_rank(diffs)
                except AllZeroDifferences:
                    entry.update(status="all_zero", statistic=None, p_value=None, n=0)
                else:
                    entry.update(status="ok", statistic=res.statistic, p_value=res.p_value, n=res.n,
                                 method=res.details["method"])
                out.pairs.append(entry)
        if (model, baseline) not in grid:
            continue
        base = grid[(model, baseline)]
        for c in present:
            for p in projects:
                for metric in metrics:
                    b0 = base[p].metric(metric)
                    v = grid[(model, c)][p].metric(metric)
                    gain = None if (b0 in (None, 0) or v is None) else (v - b0) / b0
                    out.improvements.append({"model": model, "combo": c, "project": p,
                                             "metric": metric, "value": v, "baseline": b0,
                                             "improvement": gain})
    return out
