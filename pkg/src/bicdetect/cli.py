"""Command-line entry point: ``bicdetect <stage|run|synth> [flags]``.

Exit codes: 0 success, 1 validation (including bad usage), 2 data error,
3 anything else.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .errors import BicError, ValidationError

log = logging.getLogger("bicdetect")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ValidationError(f"{self.prog}: {message}")


def _common(p):
    p.add_argument("--config", help="TOML run configuration")
    p.add_argument("--seed", type=int, help="master seed (default 42)")
    p.add_argument("--combos", help="comma-separated feature combinations, e.g. GS,GS+TP,GS-ALL")
    p.add_argument("--models", help="classifier specs, comma-separated (use ';' when specs carry parameters)")
    p.add_argument("--mode", choices=("added_only", "added_plus_context"), help="fragment extraction mode")
    p.add_argument("--vocab", choices=("train", "full"), help="rows the vocabulary is built from")
    p.add_argument("--paper-faithful", action="store_true",
                   help="greedy selection scores candidates on the test split")
    p.add_argument("--coarse", action="store_true", help="halve the feature count per elimination round")
    p.add_argument("--out", help="output directory")
    p.add_argument("--workers", type=int, help="worker threads for per-cell work")


def build_parser():
    parser = _Parser(prog="bicdetect", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"bicdetect {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for stage in ("ingest", "encode", "rank", "select", "train", "explain", "run"):
        _common(sub.add_parser(stage, help=f"run the {stage} stage" if stage != "run" else "run every stage"))

    p = sub.add_parser("extract", help="mine features, or print the fragments of one diff")
    _common(p)
    p.add_argument("--diff", help="unified diff file; prints its code fragments as JSON")

    p = sub.add_parser("evaluate", help="score predictions")
    _common(p)
    p.add_argument("--predictions", help="CSV with commit_id,proba (optionally label)")
    p.add_argument("--labels", help="CSV with commit_id,label when predictions carry no labels")
    p.add_argument("--project", default="external")
    p.add_argument("--combo", default="external")
    p.add_argument("--model", default="external")

    p = sub.add_parser("compare", help="signed-rank tests and gain tables from results.csv")
    _common(p)
    p.add_argument("--baseline", help="baseline combination (default GS)")
    p.add_argument("--results", help="results.csv to read instead of the run directory's")

    p = sub.add_parser("synth", help="write the synthetic planted-pattern corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--commits", type=int, default=300)
    p.add_argument("--seed", type=int, default=0)
    return parser


def _overrides(args):
    return {
        "seed": args.seed, "combos": args.combos, "models": args.models, "mode": args.mode,
        "vocab": args.vocab, "paper_faithful": args.paper_faithful, "coarse": args.coarse,
        "out": args.out, "workers": args.workers, "baseline": getattr(args, "baseline", None),
    }


def _config(args):
    from .config import load_config
    if not args.config:
        raise ValidationError(f"{args.command} needs --config")
    return load_config(args.config, _overrides(args))


def _cmd_extract_diff(args):
    from .syntax import extract_fragments
    text = Path(args.diff).read_text(encoding="utf-8", errors="replace")
    frags = extract_fragments(text, args.mode or "added_only")
    doc = [{"language": f.language, "text": f.text, "origin": list(f.origin)} for f in frags]
    print(json.dumps(doc, indent=2))


def _cmd_evaluate_external(args):
    import csv

    import numpy as np

    from .evaluate import metrics
    from .evaluate.report import write_results_csv
    from .learn import load_external_predictions

    with open(args.predictions, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    ids = [r["commit_id"] for r in rows]
    if rows and "label" in rows[0]:
        labels = {r["commit_id"]: r["label"] for r in rows}
    elif args.labels:
        with open(args.labels, newline="", encoding="utf-8") as fh:
            labels = {r["commit_id"]: r["label"] for r in csv.DictReader(fh)}
    else:
        raise ValidationError("predictions carry no label column; pass --labels")
    missing = [c for c in ids if c not in labels]
    if missing:
        raise ValidationError(f"no label for commit(s) {missing[:5]}")
    proba = load_external_predictions(args.predictions, ids)
    y = np.array([int(labels[c]) for c in ids])
    row = metrics(y, (proba >= 0.5).astype(int), proba, args.project, args.combo, args.model)
    c = row.confusion
    print(json.dumps({"precision": row.precision, "recall": row.recall, "f1": row.f1, "auc": row.auc,
                      "tp": c.tp, "fp": c.fp, "tn": c.tn, "fn": c.fn, "flags": list(row.flags)}, indent=2))
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        write_results_csv([row], Path(args.out) / "results.csv")


def _cmd_compare_file(args):
    from .evaluate import compare_combos
    from .evaluate.report import read_results_csv, write_comparison_md, write_plots, write_significance_json

    rows = read_results_csv(args.results)
    out = Path(args.out) if args.out else Path(args.results).parent
    out.mkdir(parents=True, exist_ok=True)
    comparison = compare_combos(rows, args.baseline or "GS")
    write_significance_json(comparison, out / "significance.json")
    write_comparison_md(rows, comparison, out / "comparison.md")
    write_plots(rows, comparison, out / "plots")
    print((out / "comparison.md").read_text(encoding="utf-8"))


def _cmd_synth(args):
    from .synth import generate_corpus
    out = Path(args.out)
    labels = generate_corpus(out, args.commits, args.seed)
    cfg = out / "config.toml"
    if not cfg.exists():
        cfg.write_text(SYNTH_CONFIG, encoding="utf-8")
    print(f"wrote {labels} and {args.commits} patches; config at {cfg}")


SYNTH_CONFIG = """\
seed = 42
out = "run"

[[projects]]
name = "synthetic"
labels = "labels.csv"
patch_dir = "patches"
schema = { timestamp = "timestamp" }

[selection]
estimator = "rf:n_trees=50"
coarse = true
coarse_floor = 20

[explain]
combo = "GS+TP"
n_synthetic = 200
max_instances = 20
"""


def dispatch(args):
    from .pipeline import run_pipeline, run_stage

    cmd = args.command
    if cmd == "synth":
        return _cmd_synth(args)
    if cmd == "extract" and args.diff:
        return _cmd_extract_diff(args)
    if cmd == "evaluate" and args.predictions:
        return _cmd_evaluate_external(args)
    if cmd == "compare" and args.results:
        return _cmd_compare_file(args)
    cfg = _config(args)
    if cmd == "run":
        out = run_pipeline(cfg)
        print(f"results: {out / 'results.csv'}")
    else:
        run_stage(cfg, cmd)
        if cmd == "compare":
            print((cfg.out / "comparison.md").read_text(encoding="utf-8"))


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        dispatch(args)
    except BicError as exc:
        print(f"error ({type(exc).__name__}): {exc}", file=sys.stderr)
        return exc.exit_code
    except Exception as exc:  # noqa: BLE001 - last-resort exit code
        log.debug("internal error", exc_info=True)
        print(f"internal error ({type(exc).__name__}): {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
