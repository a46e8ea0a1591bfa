"""Synthetic Java commit corpus with planted buggy-commit patterns.

Buggy commits contain a ``switch`` block and a ``do``/``while`` loop with
probability ``p_buggy`` each, clean commits with ``p_clean``. The churn
columns are noise except ``la``, which is mildly larger for buggy commits.
"""
from __future__ import annotations

import csv
import hashlib
from pathlib import Path

import numpy as np

from .featurize import GS_DEFAULT

_VARS = ("count", "total", "index", "offset", "size", "limit", "value", "result", "flag", "depth")
_FUNCS = ("compute", "update", "load", "flush", "check", "resolve", "merge", "apply")
_OBJS = ("cache", "buffer", "table", "writer", "session", "queue")
_CLASSES = ("Scanner", "TableLoader", "Writer", "Session", "Balancer", "Config", "Tracker", "Codec")
_CONTEXT = ("    }", "", "    // existing code", "    return;", "  }")


def _pick(rng, seq):
    return seq[int(rng.integers(len(seq)))]


def _plain_statement(rng):
    v, a, b = _pick(rng, _VARS), _pick(rng, _VARS), _pick(rng, _VARS)
    f, o, n = _pick(rng, _FUNCS), _pick(rng, _OBJS), int(rng.integers(0, 100))
    templates = (
        f"int {v} = {a} + {n};",
        f"{v} = {f}({a}, {n});",
        f"if ({a} > {n}) {{ {v} = {a}; }}",
        f"if ({a} == {b} && {o} != null) {{ return {a}; }} else {{ {v}++; }}",
        f"for (int i = 0; i < {n}; i++) {{ {v} += i; }}",
        f"while ({a} < {n}) {{ {a}++; }}",
        f"return {a};",
        f"{o}.{f}({a});",
        f'String {v}Name = "{o}";',
        f"{v} = {a} * {b} - {n};",
    )
    return _pick(rng, templates)


def _switch_statement(rng):
    a, v = _pick(rng, _VARS), _pick(rng, _VARS)
    n = int(rng.integers(0, 10))
    return f"switch ({a}) {{ case {n}: {v} = {n}; break; default: {v} = 0; }}"


def _do_while_statement(rng):
    a, n = _pick(rng, _VARS), int(rng.integers(1, 50))
    return f"do {{ {a}++; }} while ({a} < {n});"


def _hunk(rng, start, statements):
    before, after = _pick(rng, _CONTEXT), _pick(rng, _CONTEXT)
    added = ["        " + s for s in statements]
    header = f"@@ -{start},2 +{start},{2 + len(added)} @@"
    return [header, " " + before] + ["+" + line for line in added] + [" " + after]


def _patch(rng, planted):
    n_files = int(rng.integers(1, 3))
    hunks_per_file = [int(rng.integers(1, 3)) for _ in range(n_files)]
    n_hunks = sum(hunks_per_file)
    bodies = [[_plain_statement(rng) for _ in range(int(rng.integers(2, 7)))] for _ in range(n_hunks)]
    for stmt in planted:
        body = bodies[int(rng.integers(n_hunks))]
        body.insert(int(rng.integers(len(body) + 1)), stmt)
    lines, k = [], 0
    classes = rng.permutation(len(_CLASSES))[:n_files]
    for f, n_h in enumerate(hunks_per_file):
        path = f"src/main/java/org/demo/{_CLASSES[classes[f]]}.java"
        lines += [f"diff --git a/{path} b/{path}", "index 1a2b3c4..5d6e7f8 100644",
                  f"--- a/{path}", f"+++ b/{path}"]
        start = int(rng.integers(5, 40))
        for _ in range(n_h):
            lines += _hunk(rng, start, bodies[k])
            start += 20 + len(bodies[k])
            k += 1
    return "\n".join(lines) + "\n"


def _churn(rng, label, informative_shift):
    row = {
        "ns": int(rng.integers(1, 4)), "nd": int(rng.integers(1, 6)), "nf": int(rng.integers(1, 8)),
        "entropy": round(float(rng.random()), 4),
        "la": round(float(rng.lognormal(3.0, 1.0)) * (1.0 + informative_shift * label), 2),
        "ld": round(float(rng.lognormal(2.0, 1.0)), 2), "lt": int(rng.integers(10, 2000)),
        "ndev": int(rng.integers(1, 20)), "age": round(float(rng.exponential(30.0)), 2),
        "nuc": int(rng.integers(1, 10)), "exp": int(rng.integers(0, 500)), "sexp": int(rng.integers(0, 100)),
    }
    return row


def generate_corpus(out_dir, n_commits=300, seed=0, buggy_fraction=0.5, p_buggy=0.8, p_clean=0.2,
                    informative_shift=0.15, project="synthetic"):
    """Write ``labels.csv`` and ``patches/<id>.diff`` under ``out_dir``; returns the labels path."""
    rng = np.random.default_rng(seed)
    out = Path(out_dir)
    (out / "patches").mkdir(parents=True, exist_ok=True)
    t = 1_500_000_000
    rows = []
    for i in range(n_commits):
        cid = hashlib.sha1(f"{project}:{seed}:{i}".encode()).hexdigest()
        label = int(rng.random() < buggy_fraction)
        p = p_buggy if label else p_clean
        planted = []
        if rng.random() < p:
            planted.append(_switch_statement(rng))
        if rng.random() < p:
            planted.append(_do_while_statement(rng))
        (out / "patches" / f"{cid}.diff").write_text(_patch(rng, planted), encoding="utf-8")
        t += int(rng.integers(600, 86_400))
        rows.append({"commit_id": cid, "label": label, "timestamp": t, **_churn(rng, label, informative_shift)})
    labels = out / "labels.csv"
    with labels.open("w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=["commit_id", "label", "timestamp", *GS_DEFAULT], lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    return labels
