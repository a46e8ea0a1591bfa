"""Result tables: results.csv, significance.json, comparison.md and SVG plots."""
from __future__ import annotations

import csv
import json
from pathlib import Path

from .compare import METRICS, combo_sort_key
from .metrics import ConfusionCounts, EvalRow
from .plots import box_chart, line_chart

RESULT_COLUMNS = ("project", "combo", "model", "precision", "recall", "f1", "auc",
                  "tp", "fp", "tn", "fn", "n_features", "flags")


def _num(v, digits=6):
    return "" if v is None else f"{v:.{digits}f}"


def _row_key(r):
    return (r.project, r.model, combo_sort_key(r.combo))


def write_results_csv(rows, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RESULT_COLUMNS)
        for r in sorted(rows, key=_row_key):
            c = r.confusion
            w.writerow([r.project, r.combo, r.model, _num(r.precision), _num(r.recall), _num(r.f1),
                        _num(r.auc), c.tp, c.fp, c.tn, c.fn, r.extra.get("n_features", ""),
                        ";".join(r.flags)])


def read_results_csv(path):
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for d in csv.DictReader(fh):
            extra = {"n_features": int(d["n_features"])} if d.get("n_features") else {}
            rows.append(EvalRow(
                d["project"], d["combo"], d["model"], float(d["precision"]), float(d["recall"]),
                float(d["f1"]), float(d["auc"]) if d["auc"] else None,
                ConfusionCounts(int(d["tp"]), int(d["fp"]), int(d["tn"]), int(d["fn"])),
                tuple(filter(None, d.get("flags", "").split(";"))), extra))
    return rows


def _clean(obj):
    if isinstance(obj, float):
        return round(obj, 12)
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def write_significance_json(comparison, path, extra=None):
    doc = {"baseline": comparison.baseline, "projects": comparison.projects,
           "combos": comparison.combos, "tests": comparison.pairs,
           "note": "two-sided Wilcoxon signed-rank on per-project differences (b - a); "
                   "exact p for n <= 20, zeros dropped"}
    if extra:
        doc.update(extra)
    Path(path).write_text(json.dumps(_clean(doc), indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _table(header, body):
    lines = ["| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
    lines += ["| " + " | ".join(str(c) for c in row) + " |" for row in body]
    return "\n".join(lines)


def comparison_markdown(rows, comparison, title="Feature-combination comparison"):
    models = sorted({r.model for r in rows})
    projects = sorted({r.project for r in rows})
    combos = sorted({r.combo for r in rows}, key=combo_sort_key)
    cell = {(r.model, r.combo, r.project): r for r in rows}
    out = [f"# {title}", ""]
    for model in models:
        out += [f"## Model `{model}`", ""]
        header = ["Project", "Combo", "P", "R", "F1", "AUC", "#features"]
        body = []
        for p in projects:
            for c in combos:
                r = cell.get((model, c, p))
                if r is None:
                    continue
                body.append([p, c, _num(r.precision, 2), _num(r.recall, 2), _num(r.f1, 2),
                             _num(r.auc, 2) or "n/a", r.extra.get("n_features", "")])
        out += [_table(header, body), ""]
        gains = [g for g in comparison.improvements if g["model"] == model and g["metric"] == "f1"]
        if gains:
            out += [f"### F1 change relative to {comparison.baseline}", ""]
            by = {(g["combo"], g["project"]): g["improvement"] for g in gains}
            present = [c for c in combos if any(k[0] == c for k in by)]
            body = [[p] + [("n/a" if by.get((c, p)) is None else f"{100 * by[(c, p)]:+.1f}%") for c in present]
                    for p in projects]
            out += [_table(["Project"] + present, body), ""]
        tests = [t for t in comparison.pairs if t["model"] == model and comparison.baseline in (t["a"], t["b"])]
        if tests:
            out += [f"### Signed-rank tests against {comparison.baseline}", ""]
            body = []
            for t in tests:
                other = t["b"] if t["a"] == comparison.baseline else t["a"]
                p = t.get("p_value")
                body.append([other, t["metric"], t["status"], "" if p is None else f"{p:.5f}",
                             "" if t.get("statistic") is None else f"{t['statistic']:g}"])
            out += [_table(["Combo", "Metric", "Status", "p", "W"], body), ""]
    return "\n".join(out).rstrip() + "\n"


def write_comparison_md(rows, comparison, path, title="Feature-combination comparison"):
    Path(path).write_text(comparison_markdown(rows, comparison, title), encoding="utf-8")


def write_plots(rows, comparison, out_dir):
    """One F1-gain line chart and one F1 box chart per model; returns written paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    projects = sorted({r.project for r in rows})
    for model in sorted({r.model for r in rows}):
        combos = sorted({r.combo for r in rows if r.model == model}, key=combo_sort_key)
        series = {}
        for c in combos:
            if c == comparison.baseline:
                continue
            vals = {g["project"]: g["improvement"] for g in comparison.improvements
                    if g["model"] == model and g["combo"] == c and g["metric"] == "f1"}
            if vals:
                series[c] = [vals.get(p) for p in projects]
        if series:
            p = out_dir / f"f1_gain_{model}.svg"
            p.write_text(line_chart(series, projects, f"F1 change vs {comparison.baseline} ({model})",
                                    "relative change", zero_line=True), encoding="utf-8")
            written.append(p)
        for metric in METRICS:
            groups = {c: [r.metric(metric) for r in rows if r.model == model and r.combo == c
                          and r.metric(metric) is not None] for c in combos}
            p = out_dir / f"{metric}_box_{model}.svg"
            p.write_text(box_chart(groups, f"{metric} by feature combination ({model})", metric),
                         encoding="utf-8")
            written.append(p)
    return written
