"""Token-pattern / token-sequence mining, churn metrics and sparse encoding."""
from __future__ import annotations

import csv
import math
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .corpus import LabelSchema
from .errors import (
    DataError,
    EmptyVocabulary,
    MissingMetric,
    NonFiniteValue,
    ValidationError,
)
from .syntax import build_token_tree, extract_fragments, python_kinds, tree_token_sequence

GS_DEFAULT = ("ns", "nd", "nf", "entropy", "la", "ld", "lt", "ndev", "age", "nuc", "exp", "sexp")
NAMESPACES = ("gs", "ts", "tp")
COMBOS = ("GS", "TS", "TP", "GS+TS", "GS+TP", "TS+TP", "GS+TS+TP")
PATH_JOINER = "-"
GRAM_JOINER = "_"


def parse_combo(combo):
    """``"GS+TP"`` → ``("gs", "tp")``; namespaces come back in canonical order."""
    if isinstance(combo, (tuple, list, frozenset, set)):
        parts = {str(p).lower() for p in combo}
    else:
        text = str(combo).strip().upper()
        if text == "GS-ALL":
            text = "GS"
        parts = {p.strip().lower() for p in text.replace(",", "+").split("+") if p.strip()}
    bad = parts - set(NAMESPACES)
    if bad or not parts:
        raise ValidationError(f"bad feature combination {combo!r}")
    return tuple(ns for ns in NAMESPACES if ns in parts)


def combo_name(namespaces):
    return "+".join(ns.upper() for ns in parse_combo(namespaces))


# -- mining ------------------------------------------------------------------

def extract_tp(tree):
    """One dash-joined kind path per leaf, rooted at the statement-level node."""
    out = Counter()
    kinds, children = tree.kinds, tree.children
    stack = [(c, kinds[c]) for c in reversed(children[0])]
    while stack:
        n, path = stack.pop()
        ch = children[n]
        if not ch:
            out[path] += 1
            continue
        for c in reversed(ch):
            stack.append((c, path + PATH_JOINER + kinds[c]))
    return out


def extract_ts(sequence, n_min=1, n_max=5):
    if n_min < 1 or n_max < n_min:
        raise ValidationError("need 1 <= n_min <= n_max")
    seq = list(sequence)
    out = Counter()
    for n in range(n_min, min(n_max, len(seq)) + 1):
        for i in range(len(seq) - n + 1):
            out[GRAM_JOINER.join(seq[i:i + n])] += 1
    return out


@dataclass
class CommitFeatures:
    commit_id: str
    tp: Counter = field(default_factory=Counter)
    ts: Counter = field(default_factory=Counter)
    gs: dict | None = None
    n_fragments: int = 0
    n_leaves: int = 0


def commit_features(record, mode="added_only", n_range=(1, 5)):
    feats = CommitFeatures(record.commit_id, gs=record.gs_row)
    for frag in extract_fragments(record.patch_text or "", mode, record.commit_id):
        feats.n_fragments += 1
        if frag.language == "python":
            feats.ts.update(extract_ts(python_kinds(frag.text), *n_range))
            continue
        tree = build_token_tree(frag)
        feats.tp.update(extract_tp(tree))
        feats.n_leaves += tree.leaf_count()
        feats.ts.update(extract_ts(tree_token_sequence(tree), *n_range))
    return feats


def _features_chunk(args):
    records, mode, n_range = args
    return [commit_features(r, mode, n_range) for r in records]


def extract_corpus(dataset, mode="added_only", n_range=(1, 5), workers=1):
    """Per-commit features in dataset order; ``workers > 1`` uses processes."""
    records = list(dataset)
    if workers <= 1 or len(records) < 2 * workers:
        return [commit_features(r, mode, n_range) for r in records]
    size = math.ceil(len(records) / (workers * 4))
    chunks = [(records[i:i + size], mode, tuple(n_range)) for i in range(0, len(records), size)]
    out = []
    with ProcessPoolExecutor(max_workers=workers) as pool:
        for part in pool.map(_features_chunk, chunks):
            out.extend(part)
    return out


# -- churn metrics -----------------------------------------------------------

_NON_METRIC = ("commit_id", "label", "timestamp", "project", "patch_path")


def _finite(raw, where):
    try:
        v = float(raw)
    except (TypeError, ValueError):
        raise NonFiniteValue(f"{where}: {raw!r} is not a number") from None
    if not math.isfinite(v):
        raise NonFiniteValue(f"{where}: {raw!r} is not finite")
    return v


def load_gs(source, schema=None, metrics=None, commit_ids=None):
    """Read churn metrics per commit from a CSV.

    ``metrics`` defaults to ``schema.gs_columns`` and then to the standard
    12-metric set; ``"auto"`` takes every column that is not an id, label,
    timestamp, project or patch column. Missing values are errors.
    """
    schema = schema or LabelSchema()
    path = Path(source)
    if not path.is_file():
        raise DataError(f"metric file not found: {path}")
    if metrics is None:
        metrics = schema.gs_columns if schema.gs_columns is not None else GS_DEFAULT
    with path.open(newline="", encoding="utf-8-sig") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        if schema.commit_id not in header:
            raise MissingMetric(f"{path}: no {schema.commit_id!r} column")
        if metrics == "auto":
            skip = {schema.commit_id, schema.label, schema.timestamp, schema.project,
                    schema.patch_path, *_NON_METRIC}
            metrics = [c for c in header if c not in skip]
        metrics = list(metrics)
        absent = [m for m in metrics if m not in header]
        if absent:
            raise MissingMetric(f"{path}: missing metric column(s) {absent}")
        rows = {}
        for lineno, row in enumerate(reader, start=2):
            cid = (row[schema.commit_id] or "").strip()
            vals = {}
            for m in metrics:
                raw = (row[m] or "").strip()
                if raw == "":
                    raise MissingMetric(f"{path.name}:{lineno}: empty {m!r} for {cid}")
                vals[m] = _finite(raw, f"{path.name}:{lineno}:{m}")
            rows[cid] = vals
    if commit_ids is not None:
        lacking = [c for c in commit_ids if c not in rows]
        if lacking:
            raise MissingMetric(f"no metric row for commit(s) {lacking[:5]}")
    return rows


# -- vocabulary and encoding ---------------------------------------------------

class FeatureVocabulary:
    """Ordered ``(namespace, name)`` columns: namespace order, then name order."""

    def __init__(self, entries):
        entries = list(entries)
        key = {ns: i for i, ns in enumerate(NAMESPACES)}
        if entries != sorted(entries, key=lambda e: (key[e[0]], e[1])):
            raise ValidationError("vocabulary entries are not in canonical order")
        self.entries = tuple(entries)
        self._index = {e: i for i, e in enumerate(self.entries)}
        self.namespaces = frozenset(ns for ns, _ in self.entries)
        if len(self._index) != len(self.entries):
            raise ValidationError("duplicate vocabulary entries")

    def __len__(self):
        return len(self.entries)

    def __eq__(self, other):
        return isinstance(other, FeatureVocabulary) and self.entries == other.entries

    def __hash__(self):
        return hash(self.entries)

    def __repr__(self):
        counts = Counter(ns for ns, _ in self.entries)
        return f"FeatureVocabulary({dict(counts)})"

    def index(self, namespace, name):
        return self._index.get((namespace, name))

    @property
    def labels(self):
        return [f"{ns}:{name}" for ns, name in self.entries]

    def columns_of(self, namespace):
        return np.array([i for i, (ns, _) in enumerate(self.entries) if ns == namespace], dtype=np.int64)

    def namespace_sizes(self):
        c = Counter(ns for ns, _ in self.entries)
        return {ns: c.get(ns, 0) for ns in NAMESPACES}

    def subset(self, columns):
        """Vocabulary over ``columns`` kept in canonical order."""
        cols = sorted(set(int(c) for c in columns))
        return FeatureVocabulary([self.entries[c] for c in cols])

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["index", "namespace", "name"])
            for i, (ns, name) in enumerate(self.entries):
                w.writerow([i, ns, name])

    @classmethod
    def from_csv(cls, path):
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
        for expect, row in enumerate(rows):
            if int(row["index"]) != expect:
                raise DataError(f"{path}: vocabulary indices are not contiguous")
        return cls((r["namespace"], r["name"]) for r in rows)


def _parts(item):
    if isinstance(item, CommitFeatures):
        return item.tp, item.ts, item.gs
    tp, ts, gs = item
    return tp or {}, ts or {}, gs


def build_vocabulary(corpus, combo, gs_names=None):
    """Sorted union of observed feature names in the combo's namespaces.

    ``corpus`` holds :class:`CommitFeatures` or ``(tp, ts, gs)`` triples.
    GS columns are the metric names the rows carry (``gs_names`` overrides).
    """
    namespaces = parse_combo(combo)
    items = [_parts(c) for c in corpus]
    if not items:
        raise EmptyVocabulary("empty corpus")
    names = {ns: set() for ns in namespaces}
    if "gs" in namespaces:
        if gs_names is not None:
            names["gs"] = set(gs_names)
        else:
            for _, _, gs in items:
                if gs is None:
                    raise MissingMetric("combination needs churn metrics but a commit has none")
                names["gs"].update(gs)
    for ns, pos in (("tp", 0), ("ts", 1)):
        if ns in names:
            for it in items:
                names[ns].update(it[pos])
    entries = [(ns, n) for ns in NAMESPACES if ns in names for n in sorted(names[ns])]
    if not entries:
        raise EmptyVocabulary(f"no features observed for {combo_name(namespaces)}")
    return FeatureVocabulary(entries)


def _encode_parts(item, vocab):
    tp, ts, gs = _parts(item)
    cols, vals = [], []
    dropped = 0
    for ns, bag in (("ts", ts), ("tp", tp)):
        if ns not in vocab.namespaces:
            continue
        for name, count in bag.items():
            j = vocab.index(ns, name)
            if j is None:
                dropped += count
            else:
                cols.append(j)
                vals.append(float(count))
    for j, (ns, name) in enumerate(vocab.entries):
        if ns != "gs":
            break
        if gs is None or name not in gs:
            raise MissingMetric(f"metric {name!r} missing for a commit")
        v = float(gs[name])
        if not math.isfinite(v):
            raise NonFiniteValue(f"metric {name!r} is not finite")
        if v != 0.0:
            cols.append(j)
            vals.append(v)
    return cols, vals, dropped


def encode(item, vocab):
    """1×n CSR row: counts for ts/tp columns, metric values for gs columns.

    Features outside the vocabulary are dropped.
    """
    cols, vals, _ = _encode_parts(item, vocab)
    order = np.argsort(cols, kind="stable")
    return sp.csr_matrix(
        (np.asarray(vals, dtype=np.float64)[order], np.asarray(cols, dtype=np.int64)[order],
         np.array([0, len(cols)])),
        shape=(1, len(vocab)),
    )


@dataclass
class FeatureMatrix:
    vocabulary: FeatureVocabulary
    X: sp.csr_matrix
    labels: np.ndarray
    timestamps: np.ndarray
    commit_ids: list
    oov: np.ndarray = None

    def __post_init__(self):
        n = self.X.shape[0]
        if self.X.shape[1] != len(self.vocabulary):
            raise ValidationError("matrix width differs from vocabulary size")
        if not (len(self.labels) == len(self.timestamps) == len(self.commit_ids) == n):
            raise ValidationError("rows, labels, timestamps and ids are misaligned")
        if self.oov is None:
            self.oov = np.zeros(n, dtype=np.int64)

    @property
    def shape(self):
        return self.X.shape

    def rows(self, idx):
        idx = np.asarray(idx, dtype=np.int64)
        return FeatureMatrix(self.vocabulary, self.X[idx], self.labels[idx], self.timestamps[idx],
                             [self.commit_ids[i] for i in idx], self.oov[idx])

    def columns(self, cols):
        """Restrict to ``cols`` (canonical order)."""
        cols = np.array(sorted(set(int(c) for c in cols)), dtype=np.int64)
        return FeatureMatrix(self.vocabulary.subset(cols), self.X[:, cols].tocsr(), self.labels,
                             self.timestamps, list(self.commit_ids), self.oov)

    def write(self, vocab_path, rows_path):
        self.vocabulary.to_csv(vocab_path)
        X = self.X.tocsr()
        with open(rows_path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["commit_id", "label", "timestamp", "values"])
            for i, cid in enumerate(self.commit_ids):
                lo, hi = X.indptr[i], X.indptr[i + 1]
                pairs = " ".join(f"{j}:{_fmt(v)}" for j, v in zip(X.indices[lo:hi], X.data[lo:hi]))
                w.writerow([cid, int(self.labels[i]), int(self.timestamps[i]), pairs])

    @classmethod
    def read(cls, vocab_path, rows_path):
        vocab = FeatureVocabulary.from_csv(vocab_path)
        ids, labels, stamps = [], [], []
        indptr, indices, data = [0], [], []
        with open(rows_path, newline="", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                ids.append(row["commit_id"])
                labels.append(int(row["label"]))
                stamps.append(int(row["timestamp"]))
                for pair in row["values"].split():
                    j, v = pair.split(":", 1)
                    indices.append(int(j))
                    data.append(float(v))
                indptr.append(len(indices))
        X = sp.csr_matrix((np.array(data, dtype=np.float64), np.array(indices, dtype=np.int64),
                           np.array(indptr, dtype=np.int64)), shape=(len(ids), len(vocab)))
        return cls(vocab, X, np.array(labels, dtype=np.int64), np.array(stamps, dtype=np.int64), ids)


def _fmt(v):
    return str(int(v)) if float(v).is_integer() else repr(float(v))


def assemble_matrix(dataset, combo, *, features=None, vocabulary=None, vocab_rows=None,
                    mode="added_only", n_range=(1, 5), gs_names=None, workers=1):
    """Encode every commit of ``dataset`` in dataset order.

    The vocabulary is taken as given, or built from the rows listed in
    ``vocab_rows`` (all rows when omitted).
    """
    records = list(dataset)
    if features is None:
        features = extract_corpus(records, mode, n_range, workers)
    if len(features) != len(records):
        raise ValidationError("features and dataset differ in length")
    if vocabulary is None:
        src = features if vocab_rows is None else [features[i] for i in vocab_rows]
        vocabulary = build_vocabulary(src, combo, gs_names)
    indptr, indices, data = [0], [], []
    oov = np.zeros(len(records), dtype=np.int64)
    for i, item in enumerate(features):
        cols, vals, dropped = _encode_parts(item, vocabulary)
        order = sorted(range(len(cols)), key=cols.__getitem__)
        indices.extend(cols[k] for k in order)
        data.extend(vals[k] for k in order)
        indptr.append(len(indices))
        oov[i] = dropped
    X = sp.csr_matrix((np.array(data, dtype=np.float64), np.array(indices, dtype=np.int64),
                       np.array(indptr, dtype=np.int64)), shape=(len(records), len(vocabulary)))
    labels = np.array([r.label for r in records], dtype=np.int64)
    stamps = np.array([r.timestamp if r.timestamp is not None else -1 for r in records], dtype=np.int64)
    return FeatureMatrix(vocabulary, X, labels, stamps, [r.commit_id for r in records], oov)
