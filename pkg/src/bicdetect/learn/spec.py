"""Classifier specifications and their defaults."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from ..errors import ValidationError

KINDS = ("rf", "knn", "gbc", "pct")
DEFAULTS = {
    "rf": {"n_trees": 100, "max_depth": None, "min_leaf": 1, "max_features": "sqrt"},
    "knn": {"k": 5, "distance": "euclidean"},
    "gbc": {"n_stages": 100, "learning_rate": 0.1, "max_depth": 3},
    "pct": {"epochs": 1000, "learning_rate": 1.0},
}
_POSITIVE_INTS = ("n_trees", "min_leaf", "k", "n_stages", "epochs")


@dataclass(frozen=True)
class ClassifierSpec:
    kind: str
    params: dict = field(default_factory=dict, hash=False)
    seed: int = 42

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"unknown classifier kind {self.kind!r}; expected one of {KINDS}")
        extra = set(self.params) - set(DEFAULTS[self.kind])
        if extra:
            raise ValidationError(f"unknown {self.kind} parameter(s): {sorted(extra)}")
        merged = {**DEFAULTS[self.kind], **self.params}
        object.__setattr__(self, "params", merged)
        for key in _POSITIVE_INTS:
            if key in merged:
                v = merged[key]
                if isinstance(v, bool) or not isinstance(v, int) or v < 1:
                    raise ValidationError(f"{key} must be a positive integer, got {v!r}")
        md = merged.get("max_depth")
        if md is not None and (isinstance(md, bool) or not isinstance(md, int) or md < 1):
            raise ValidationError(f"max_depth must be a positive integer or None, got {md!r}")
        lr = merged.get("learning_rate")
        if lr is not None and not (isinstance(lr, (int, float)) and math.isfinite(lr) and lr > 0):
            raise ValidationError(f"learning_rate must be > 0, got {lr!r}")
        if self.kind == "knn" and merged["distance"] not in ("euclidean", "cosine"):
            raise ValidationError("knn distance must be euclidean or cosine")
        mf = merged.get("max_features")
        if mf is not None and mf not in ("sqrt", "all") and not (isinstance(mf, int) and mf >= 1):
            raise ValidationError(f"max_features must be 'sqrt', 'all' or a positive integer, got {mf!r}")
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) or self.seed < 0:
            raise ValidationError("seed must be a non-negative integer")

    def with_seed(self, seed):
        return ClassifierSpec(self.kind, dict(self.params), int(seed))

    def to_dict(self):
        return {"kind": self.kind, "params": dict(self.params), "seed": self.seed}

    @classmethod
    def from_dict(cls, d):
        return cls(d["kind"], dict(d.get("params", {})), int(d.get("seed", 42)))

    @classmethod
    def parse(cls, text, seed=42):
        """``"rf"`` or ``"rf:n_trees=50,max_depth=8"``."""
        kind, _, rest = text.partition(":")
        params = {}
        for item in filter(None, (p.strip() for p in rest.split(","))):
            key, sep, raw = item.partition("=")
            if not sep:
                raise ValidationError(f"bad classifier parameter {item!r}")
            params[key.strip()] = _coerce(raw.strip())
        return cls(kind.strip(), params, seed)


def _coerce(raw):
    low = raw.lower()
    if low in ("none", "null"):
        return None
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        return float(raw)
    except ValueError:
        return raw
