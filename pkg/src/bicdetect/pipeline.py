"""Stage orchestration. Each stage reads the previous stage's files under the
output directory and writes its own, so any stage can be re-run alone.

Layout below ``out/``::

    ingest/<project>.jsonl, ingest/patches/<project>/<id>.diff
    extract/<project>.jsonl
    encode/<project>/split.json, encode/<project>/<COMBO>/{vocab,rows}.csv
    rank/<project>/<COMBO>/ranks.csv
    select/<project>/<COMBO>/<model>/trace.json
    train/<project>/<COMBO>/<model>/{model.json,columns.json,predictions.csv}
    results.csv, significance.json, comparison.md, plots/, explain.json,
    conditions_top.md, manifest.json
"""
from __future__ import annotations

import csv
import hashlib
import json
import logging
import platform
import re
import warnings
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timezone
from importlib import metadata
from pathlib import Path

import numpy as np

from . import __version__
from ._accel import backend
from .corpus import (
    attach_gs,
    attach_patches_from_files,
    fetch_patches,
    list_repositories,
    load_labels,
    read_dataset,
    sort_by_time,
    split_time_ordered,
    write_dataset,
)
from .errors import DataError, LowFidelity
from .evaluate import compare_combos, metrics
from .evaluate.report import (
    read_results_csv,
    write_comparison_md,
    write_plots,
    write_results_csv,
    write_significance_json,
)
from .explain import aggregate_conditions, conditions_markdown, explain_instance, write_explain_json
from .featurize import (
    CommitFeatures,
    FeatureMatrix,
    assemble_matrix,
    combo_name,
    extract_corpus,
    load_gs,
    parse_combo,
)
from .learn import ClassifierSpec, fit, load_model, predict_proba, save_model
from .select import (
    RankedFeatureList,
    best_set_size_analysis,
    greedy_forward_select,
    read_ranks_csv,
    read_trace_json,
    rfe_rank,
    selection_split,
    write_ranks_csv,
    write_trace_json,
)

log = logging.getLogger("bicdetect")
STAGES = ("ingest", "extract", "encode", "rank", "select", "train", "evaluate", "compare", "explain")


def derive_seed(seed, *parts):
    """Per-stage seed: first 8 bytes of sha256("seed:part:part...") as a 63-bit integer."""
    text = ":".join(str(p) for p in (seed, *parts))
    return int.from_bytes(hashlib.sha256(text.encode()).digest()[:8], "big") & (2**63 - 1)


def model_dirname(name):
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", name)


def _sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def _write_json(path, obj):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _read_json(path):
    path = Path(path)
    if not path.is_file():
        raise DataError(f"missing stage artifact {path}; run the earlier stage first")
    return json.loads(path.read_text(encoding="utf-8"))


def _map(cfg, fn, items):
    items = list(items)
    if cfg.workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
        return list(pool.map(fn, items))


def _dist_version(pkg):
    try:
        return metadata.version(pkg)
    except metadata.PackageNotFoundError:
        return None


def update_manifest(cfg, stage, info=None):
    path = cfg.out / "manifest.json"
    doc = json.loads(path.read_text(encoding="utf-8")) if path.is_file() else {}
    if doc.get("config_hash") not in (None, cfg.digest()):
        log.warning("output directory held a run with a different config; manifest reset")
        doc = {}
    doc["config_hash"] = cfg.digest()
    doc["config"] = cfg.to_dict()
    doc["versions"] = {"bicdetect": __version__, "python": platform.python_version(),
                       **{pkg: _dist_version(pkg) for pkg in ("numpy", "scipy", "numba")},
                       "backend": backend()}
    stages = doc.setdefault("stages", {})
    stages[stage] = {"completed_at": datetime.now(timezone.utc).isoformat(timespec="seconds"), **(info or {})}
    if stage == "ingest" and info:
        doc["inputs"] = info.get("inputs", {})
    _write_json(path, doc)


# -- stages ------------------------------------------------------------------

def _ingest_project(p, cfg):
    ds = load_labels(p.labels, p.schema, project=p.name, source_kind=p.source_kind)
    if p.patch_dir is not None or p.schema.patch_path:
        ds = attach_patches_from_files(ds, p.patch_dir)
    else:
        roots = [r for entry in p.repos for r in list_repositories(entry)]
        if not roots:
            raise DataError(f"project {p.name}: no git repositories under {[str(r) for r in p.repos]}")
        ds = fetch_patches(ds, roots, workers=max(1, cfg.workers))
    needs_gs = any("gs" in parse_combo(c) for c in cfg.combos)
    if needs_gs:
        gs_metrics = cfg.features["gs_metrics"]
        ds = attach_gs(ds, load_gs(p.gs_file or p.labels, p.schema, gs_metrics, ds.commit_ids))
    ds = sort_by_time(ds)
    target = cfg.out / "ingest" / f"{p.name}.jsonl"
    write_dataset(ds, target, cfg.out / "ingest" / "patches" / p.name)
    patch_digest = hashlib.sha256()
    for r in ds:
        patch_digest.update(f"{r.commit_id}:{hashlib.sha256(r.patch_text.encode()).hexdigest()}\n".encode())
    digests = {"labels": _sha256_file(p.labels), "patches": patch_digest.hexdigest()}
    if p.gs_file is not None:
        digests["gs_file"] = _sha256_file(p.gs_file)
    counts = Counter(ds.labels)
    log.info("ingest %s: %d commits (%d buggy, %d clean)", p.name, len(ds), counts[1], counts[0])
    return p.name, digests


def stage_ingest(cfg):
    inputs = dict(_map(cfg, lambda p: _ingest_project(p, cfg), cfg.projects))
    update_manifest(cfg, "ingest", {"inputs": inputs})


def _features_to_json(f):
    return {"commit_id": f.commit_id, "tp": dict(sorted(f.tp.items())), "ts": dict(sorted(f.ts.items())),
            "gs": f.gs, "n_fragments": f.n_fragments, "n_leaves": f.n_leaves}


def read_features(path):
    out = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            d = json.loads(line)
            out.append(CommitFeatures(d["commit_id"], Counter(d["tp"]), Counter(d["ts"]), d.get("gs"),
                                      d.get("n_fragments", 0), d.get("n_leaves", 0)))
    return out


def _load_ingested(cfg, name):
    path = cfg.out / "ingest" / f"{name}.jsonl"
    if not path.is_file():
        raise DataError(f"missing stage artifact {path}; run ingest first")
    return read_dataset(path)


def stage_extract(cfg):
    for p in cfg.projects:
        ds = _load_ingested(cfg, p.name)
        feats = extract_corpus(ds, cfg.features["mode"], cfg.n_range, cfg.workers)
        target = cfg.out / "extract" / f"{p.name}.jsonl"
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text("".join(json.dumps(_features_to_json(f), sort_keys=True) + "\n" for f in feats),
                          encoding="utf-8")
        log.info("extract %s: %d commits, %d fragments", p.name, len(feats), sum(f.n_fragments for f in feats))
    update_manifest(cfg, "extract")


def encoded_combos(cfg):
    """Distinct namespace combinations behind the configured combos (GS-ALL shares GS)."""
    seen = []
    for c in cfg.combos:
        name = combo_name(parse_combo(c))
        if name not in seen:
            seen.append(name)
    return seen


def stage_encode(cfg):
    for p in cfg.projects:
        ds = _load_ingested(cfg, p.name)
        feats = read_features(cfg.out / "extract" / f"{p.name}.jsonl")
        if [f.commit_id for f in feats] != ds.commit_ids:
            raise DataError(f"{p.name}: extracted features do not match the ingested dataset; re-run extract")
        train, test = split_time_ordered(ds, cfg.split["train_fraction"])
        n_train = len(train)
        base = cfg.out / "encode" / p.name
        _write_json(base / "split.json", {"train": train.commit_ids, "test": test.commit_ids})
        vocab_rows = list(range(n_train)) if cfg.features["vocab"] == "train" else None
        for combo in encoded_combos(cfg):
            fm = assemble_matrix(ds, combo, features=feats, vocab_rows=vocab_rows)
            (base / combo).mkdir(parents=True, exist_ok=True)
            fm.write(base / combo / "vocab.csv", base / combo / "rows.csv")
            log.info("encode %s %s: %d x %d, %d test-time unseen feature occurrences dropped",
                     p.name, combo, fm.shape[0], fm.shape[1], int(fm.oov[n_train:].sum()))
    update_manifest(cfg, "encode")


def load_encoded(cfg, project, combo):
    """(matrix, train row indices, test row indices)."""
    base = cfg.out / "encode" / project
    name = combo_name(parse_combo(combo))
    if not (base / name / "rows.csv").is_file():
        raise DataError(f"missing encoded matrix for {project}/{name}; run encode first")
    fm = FeatureMatrix.read(base / name / "vocab.csv", base / name / "rows.csv")
    split = _read_json(base / "split.json")
    pos = {c: i for i, c in enumerate(fm.commit_ids)}
    return fm, np.array([pos[c] for c in split["train"]]), np.array([pos[c] for c in split["test"]])


def _selected_combos(cfg):
    return [c for c in cfg.combos if c != "GS-ALL"]


def stage_rank(cfg):
    est = ClassifierSpec.parse(cfg.selection["estimator"])
    sel = cfg.selection

    def run(cell):
        project, combo = cell
        fm, tr, _ = load_encoded(cfg, project, combo)
        Xt, yt = fm.X[tr], fm.labels[tr]
        if fm.shape[1] == 1:
            ranked = RankedFeatureList(np.array([1], dtype=np.int64))
        else:
            spec = est.with_seed(derive_seed(cfg.seed, "rank", project, combo))
            ranked = rfe_rank(Xt, yt, spec, sel["step"], sel["coarse"], sel["coarse_floor"])
        target = cfg.out / "rank" / project / combo / "ranks.csv"
        target.parent.mkdir(parents=True, exist_ok=True)
        write_ranks_csv(ranked, fm.vocabulary, target)
        log.info("rank %s %s: %d columns ranked", project, combo, fm.shape[1])

    _map(cfg, run, [(p.name, c) for p in cfg.projects for c in encoded_combos(cfg) if c in _selected_combos(cfg)])
    update_manifest(cfg, "rank")


def _cells(cfg, combos=None):
    combos = cfg.combos if combos is None else combos
    return [(p.name, c, m) for p in cfg.projects for c in combos for m in cfg.models]


def stage_select(cfg):
    sel = cfg.selection
    cap = sel["max_candidates"]
    if sel["coarse"]:
        cap = sel["coarse_floor"] if cap is None else min(cap, sel["coarse_floor"])

    def run(cell):
        project, combo, model_name = cell
        fm, tr, te = load_encoded(cfg, project, combo)
        ranked = read_ranks_csv(cfg.out / "rank" / project / combo / "ranks.csv")
        spec = ClassifierSpec.parse(model_name, derive_seed(cfg.seed, "select", project, combo, model_name))
        if sel["paper_faithful"]:
            fit_rows, eval_rows = tr, te
        else:
            a, b = selection_split(len(tr), sel["eval_fraction"])
            fit_rows, eval_rows = tr[a], tr[b]
        res = greedy_forward_select(ranked, fm.X[fit_rows], fm.labels[fit_rows], fm.X[eval_rows],
                                    fm.labels[eval_rows], spec, sel["criterion"], cap)
        target = cfg.out / "select" / project / combo / model_dirname(model_name) / "trace.json"
        target.parent.mkdir(parents=True, exist_ok=True)
        write_trace_json(res, fm.vocabulary, target)
        log.info("select %s %s %s: %d of %d columns kept (%s %.3f)", project, combo, model_name,
                 len(res.selected), fm.shape[1], res.criterion, res.score)

    _map(cfg, run, _cells(cfg, _selected_combos(cfg)))
    update_manifest(cfg, "select")


def _write_predictions(path, ids, labels, proba):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["commit_id", "label", "proba", "prediction"])
        for cid, y, p in zip(ids, labels, proba):
            w.writerow([cid, int(y), repr(float(p)), int(p >= 0.5)])


def read_predictions(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    return ([r["commit_id"] for r in rows], np.array([int(r["label"]) for r in rows]),
            np.array([float(r["proba"]) for r in rows]))


def stage_train(cfg):
    def run(cell):
        project, combo, model_name = cell
        fm, tr, te = load_encoded(cfg, project, combo)
        if combo == "GS-ALL":
            cols = list(range(fm.shape[1]))
        else:
            trace = read_trace_json(cfg.out / "select" / project / combo / model_dirname(model_name) / "trace.json")
            cols = sorted(trace.selected)
        spec = ClassifierSpec.parse(model_name, derive_seed(cfg.seed, "train", project, combo, model_name))
        Xc = fm.X[:, cols]
        model = fit(spec, Xc[tr], fm.labels[tr])
        proba = predict_proba(model, Xc[te])
        base = cfg.out / "train" / project / combo / model_dirname(model_name)
        base.mkdir(parents=True, exist_ok=True)
        save_model(model, base / "model.json")
        _write_json(base / "columns.json", {"columns": [int(c) for c in cols],
                                            "features": [fm.vocabulary.labels[c] for c in cols]})
        _write_predictions(base / "predictions.csv", [fm.commit_ids[i] for i in te], fm.labels[te], proba)

    _map(cfg, run, _cells(cfg))
    update_manifest(cfg, "train")


def stage_evaluate(cfg):
    rows = []
    for project, combo, model_name in _cells(cfg):
        base = cfg.out / "train" / project / combo / model_dirname(model_name)
        _, labels, proba = read_predictions(base / "predictions.csv")
        n_feat = len(_read_json(base / "columns.json")["columns"])
        row = metrics(labels, (proba >= 0.5).astype(int), proba, project, combo, model_name)
        row.extra["n_features"] = n_feat
        rows.append(row)
    write_results_csv(rows, cfg.out / "results.csv")
    log.info("evaluate: %d rows written to %s", len(rows), cfg.out / "results.csv")
    update_manifest(cfg, "evaluate")
    return rows


def stage_compare(cfg):
    rows = read_results_csv(cfg.out / "results.csv")
    baseline = cfg.compare["baseline"]
    comparison = compare_combos(rows, baseline)
    extra = {}
    if len(cfg.projects) >= 3:
        counts = {p.name: len(_read_json(cfg.out / "encode" / p.name / "split.json")["train"])
                  + len(_read_json(cfg.out / "encode" / p.name / "split.json")["test"]) for p in cfg.projects}
        sizes = {}
        for r in rows:
            if r.combo != "GS-ALL" and "n_features" in r.extra:
                sizes.setdefault(f"{r.model}/{r.combo}", {})[r.project] = r.extra["n_features"]
        extra["best_set_size"] = best_set_size_analysis(sizes, counts)
    write_significance_json(comparison, cfg.out / "significance.json", extra)
    write_comparison_md(rows, comparison, cfg.out / "comparison.md")
    write_plots(rows, comparison, cfg.out / "plots")
    update_manifest(cfg, "compare")
    return comparison


def stage_explain(cfg):
    exp_cfg = cfg.explain
    if not exp_cfg["enabled"]:
        log.info("explain: disabled in config")
        return {}
    combo = exp_cfg["combo"]
    model_name = exp_cfg["model"] or cfg.models[0]
    per_project, sections = {}, []
    for p in cfg.projects:
        fm, tr, te = load_encoded(cfg, p.name, combo)
        base = cfg.out / "train" / p.name / combo / model_dirname(model_name)
        model = load_model(base / "model.json")
        cols = _read_json(base / "columns.json")["columns"]
        vocab = fm.vocabulary.subset(cols)
        Xc = fm.X[:, cols].tocsr()
        ids, _, proba = read_predictions(base / "predictions.csv")
        pos = {c: i for i, c in enumerate(fm.commit_ids)}
        chosen = [c for c, pr in zip(ids, proba) if pr >= 0.5][:exp_cfg["max_instances"]]
        exps = []
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", LowFidelity)
            for cid in chosen:
                exps.append(explain_instance(
                    model, Xc[pos[cid]], Xc[tr], exp_cfg["n_synthetic"],
                    derive_seed(cfg.seed, "explain", p.name, cid), vocabulary=vocab,
                    fidelity_floor=exp_cfg["fidelity_floor"], commit_id=cid))
        low = sum(1 for w in caught if issubclass(w.category, LowFidelity))
        if low:
            log.warning("explain %s: %d explanation(s) below fidelity floor %.2f", p.name, low,
                        exp_cfg["fidelity_floor"])
        per_project[p.name] = exps
        agg = aggregate_conditions(exps, exp_cfg["top_k"]) if exps else {}
        sections.append(conditions_markdown(agg, f"{p.name} ({combo}, {model_name}, "
                                                 f"{len(exps)} predicted-buggy commits)", level=2))
    write_explain_json(per_project, cfg.out / "explain.json")
    (cfg.out / "conditions_top.md").write_text("# Most frequent explanation conditions\n\n" + "\n".join(sections),
                                               encoding="utf-8")
    update_manifest(cfg, "explain")
    return per_project


STAGE_FUNCS = {
    "ingest": stage_ingest, "extract": stage_extract, "encode": stage_encode, "rank": stage_rank,
    "select": stage_select, "train": stage_train, "evaluate": stage_evaluate, "compare": stage_compare,
    "explain": stage_explain,
}


def run_stage(cfg, stage):
    cfg.out.mkdir(parents=True, exist_ok=True)
    return STAGE_FUNCS[stage](cfg)


def run_pipeline(cfg, stages=STAGES):
    """Run ``stages`` in order; returns the output directory."""
    cfg.out.mkdir(parents=True, exist_ok=True)
    for stage in stages:
        log.info("stage %s", stage)
        STAGE_FUNCS[stage](cfg)
    return cfg.out
