"""Run configuration: a TOML file plus command-line overrides."""
from __future__ import annotations

import copy
import hashlib
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .corpus import SOURCE_KINDS, LabelSchema
from .errors import ConfigError
from .featurize import COMBOS, parse_combo
from .learn import ClassifierSpec

ALL_COMBOS = ("GS-ALL",) + COMBOS
MODES = ("added_only", "added_plus_context")
CRITERIA = ("f1", "precision", "recall")

DEFAULTS = {
    "seed": 42,
    "out": "runs/default",
    "workers": 1,
    "projects": [],
    "features": {"mode": "added_only", "n_min": 1, "n_max": 5, "gs_metrics": None, "vocab": "train"},
    "split": {"train_fraction": 0.7},
    "selection": {
        "estimator": "rf",
        "criterion": "f1",
        "step": 1,
        "coarse": False,
        "coarse_floor": 100,
        "max_candidates": None,
        "eval_fraction": 0.3,
        "paper_faithful": False,
    },
    "models": ["rf"],
    "combos": list(ALL_COMBOS),
    "compare": {"baseline": "GS"},
    "explain": {"enabled": True, "combo": "GS+TP", "model": None, "n_synthetic": 200,
                "max_instances": None, "fidelity_floor": 0.8, "top_k": 5},
}


@dataclass
class ProjectConfig:
    name: str
    labels: Path
    schema: LabelSchema
    source_kind: str = "manual"
    patch_dir: Path | None = None
    repos: list = field(default_factory=list)
    gs_file: Path | None = None

    def to_dict(self):
        return {
            "name": self.name, "labels": str(self.labels), "source_kind": self.source_kind,
            "schema": {k: v for k, v in vars(self.schema).items()},
            "patch_dir": None if self.patch_dir is None else str(self.patch_dir),
            "repos": [str(r) for r in self.repos],
            "gs_file": None if self.gs_file is None else str(self.gs_file),
        }


@dataclass
class RunConfig:
    seed: int
    out: Path
    workers: int
    projects: list
    features: dict
    split: dict
    selection: dict
    models: list
    combos: list
    compare: dict
    explain: dict
    base_dir: Path = field(default_factory=Path.cwd)

    @property
    def n_range(self):
        return (int(self.features["n_min"]), int(self.features["n_max"]))

    def model_specs(self):
        """``name → ClassifierSpec`` (seedless; seeds are derived per cell)."""
        return {name: ClassifierSpec.parse(name) for name in self.models}

    def to_dict(self):
        return {
            "seed": self.seed, "out": str(self.out), "workers": self.workers,
            "projects": [p.to_dict() for p in self.projects],
            "features": self.features, "split": self.split, "selection": self.selection,
            "models": list(self.models), "combos": list(self.combos),
            "compare": self.compare, "explain": self.explain,
        }

    def digest(self):
        """Hash of everything that can change outputs (worker count and output dir excluded)."""
        d = self.to_dict()
        d.pop("out")
        d.pop("workers")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()


def _merge(base, over, where=""):
    out = copy.deepcopy(base)
    for key, value in over.items():
        if key not in base:
            raise ConfigError(f"unknown config key {where}{key!r}")
        if isinstance(base[key], dict) and isinstance(value, dict):
            out[key] = _merge(base[key], value, f"{where}{key}.")
        else:
            out[key] = value
    return out


def _path(base_dir, value):
    p = Path(value)
    return p if p.is_absolute() else (base_dir / p)


def _project(d, base_dir, i):
    d = dict(d)
    if "labels" not in d:
        raise ConfigError(f"projects[{i}] needs a 'labels' file")
    labels = _path(base_dir, d.pop("labels"))
    name = d.pop("name", labels.stem)
    schema = LabelSchema.from_dict(d.pop("schema", {}))
    kind = d.pop("source_kind", "manual")
    patch_dir = d.pop("patch_dir", None)
    repos = d.pop("repos", [])
    gs_file = d.pop("gs_file", None)
    if d:
        raise ConfigError(f"projects[{i}]: unknown key(s) {sorted(d)}")
    if kind not in SOURCE_KINDS:
        raise ConfigError(f"projects[{i}]: source_kind must be one of {SOURCE_KINDS}")
    if isinstance(repos, str):
        repos = [repos]
    return ProjectConfig(name, labels, schema, kind,
                         None if patch_dir is None else _path(base_dir, patch_dir),
                         [_path(base_dir, r) for r in repos],
                         None if gs_file is None else _path(base_dir, gs_file))


def _split_list(value):
    if isinstance(value, str):
        return [v.strip() for v in value.split(";" if ":" in value else ",") if v.strip()]
    return list(value)


def build_config(raw, base_dir=None, overrides=None):
    """Validate a raw mapping (parsed TOML) with optional flag overrides; flags win."""
    base_dir = Path(base_dir or Path.cwd())
    merged = _merge(DEFAULTS, raw)
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key in ("mode", "vocab"):
            merged["features"][key] = value
        elif key in ("paper_faithful", "coarse"):
            if value:
                merged["selection"][key] = True
        elif key == "combos":
            merged["combos"] = _split_list(value)
        elif key == "models":
            merged["models"] = _split_list(value)
        elif key == "baseline":
            merged["compare"]["baseline"] = value
        elif key in ("seed", "out", "workers"):
            merged[key] = value
        else:
            raise ConfigError(f"unknown override {key!r}")

    seed = merged["seed"]
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ConfigError("seed must be a non-negative integer")
    workers = merged["workers"]
    if isinstance(workers, bool) or not isinstance(workers, int) or workers < 1:
        raise ConfigError("workers must be a positive integer")

    combos = []
    for c in merged["combos"]:
        name = str(c).strip().upper()
        if name not in ALL_COMBOS:
            raise ConfigError(f"unknown feature combination {c!r}; expected a subset of {ALL_COMBOS}")
        if name not in combos:
            combos.append(name)
    if not combos:
        raise ConfigError("no feature combinations selected")

    models = [str(m).strip() for m in merged["models"]]
    if not models:
        raise ConfigError("no models selected")
    for m in models:
        try:
            ClassifierSpec.parse(m)
        except Exception as exc:
            raise ConfigError(f"bad model spec {m!r}: {exc}") from None
    if len(set(models)) != len(models):
        raise ConfigError("duplicate model specs")

    feats = merged["features"]
    if feats["mode"] not in MODES:
        raise ConfigError(f"features.mode must be one of {MODES}")
    if feats["vocab"] not in ("train", "full"):
        raise ConfigError("features.vocab must be 'train' or 'full'")
    if not (1 <= int(feats["n_min"]) <= int(feats["n_max"])):
        raise ConfigError("need 1 <= n_min <= n_max")

    frac = merged["split"]["train_fraction"]
    if not (isinstance(frac, (int, float)) and 0 < frac < 1):
        raise ConfigError("split.train_fraction must lie in (0, 1)")

    sel = merged["selection"]
    if sel["criterion"] not in CRITERIA:
        raise ConfigError(f"selection.criterion must be one of {CRITERIA}")
    try:
        est = ClassifierSpec.parse(sel["estimator"])
    except Exception as exc:
        raise ConfigError(f"bad selection.estimator: {exc}") from None
    if est.kind not in ("rf", "gbc"):
        raise ConfigError("selection.estimator must expose importances (rf or gbc)")
    if not (isinstance(sel["step"], int) and sel["step"] >= 1):
        raise ConfigError("selection.step must be a positive integer")
    if not (isinstance(sel["coarse_floor"], int) and sel["coarse_floor"] >= 1):
        raise ConfigError("selection.coarse_floor must be a positive integer")
    mc = sel["max_candidates"]
    if mc is not None and not (isinstance(mc, int) and mc >= 1):
        raise ConfigError("selection.max_candidates must be a positive integer")
    if not 0 < sel["eval_fraction"] < 1:
        raise ConfigError("selection.eval_fraction must lie in (0, 1)")

    exp = merged["explain"]
    if exp["enabled"]:
        if str(exp["combo"]).upper() not in combos:
            raise ConfigError(f"explain.combo {exp['combo']!r} is not among the selected combinations")
        exp["combo"] = str(exp["combo"]).upper()
        if exp["model"] is not None and exp["model"] not in models:
            raise ConfigError(f"explain.model {exp['model']!r} is not among the selected models")
        if not (isinstance(exp["n_synthetic"], int) and exp["n_synthetic"] >= 1):
            raise ConfigError("explain.n_synthetic must be a positive integer")
        mi = exp["max_instances"]
        if mi is not None and not (isinstance(mi, int) and mi >= 1):
            raise ConfigError("explain.max_instances must be a positive integer")
        if not (0.0 <= exp["fidelity_floor"] <= 1.0):
            raise ConfigError("explain.fidelity_floor must lie in [0, 1]")

    if merged["compare"]["baseline"] not in combos:
        raise ConfigError(f"baseline {merged['compare']['baseline']!r} is not among the selected combinations")

    projects = [_project(p, base_dir, i) for i, p in enumerate(merged["projects"])]
    if not projects:
        raise ConfigError("config lists no projects")
    names = [p.name for p in projects]
    if len(set(names)) != len(names):
        raise ConfigError("project names must be unique")
    for p in projects:
        if not p.labels.is_file():
            raise ConfigError(f"project {p.name}: label file not found: {p.labels}")
        if p.patch_dir is not None and not p.patch_dir.is_dir():
            raise ConfigError(f"project {p.name}: patch directory not found: {p.patch_dir}")
        for r in p.repos:
            if not Path(r).is_dir():
                raise ConfigError(f"project {p.name}: repository not found: {r}")
        if p.gs_file is not None and not p.gs_file.is_file():
            raise ConfigError(f"project {p.name}: metric file not found: {p.gs_file}")
        if p.patch_dir is None and not p.repos and p.schema.patch_path is None:
            raise ConfigError(f"project {p.name}: give patch_dir, repos or a patch_path column")

    for c in combos:
        parse_combo(c)
    return RunConfig(seed, _path(base_dir, merged["out"]), workers, projects, feats, merged["split"], sel,
                     models, combos, merged["compare"], exp, base_dir)


def load_config(path, overrides=None):
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = tomllib.loads(path.read_text(encoding="utf-8"))
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return build_config(raw, path.parent.resolve(), overrides)
