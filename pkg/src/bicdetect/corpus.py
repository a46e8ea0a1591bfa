"""Labeled commit datasets, patch retrieval from git, and time-ordered splits."""
from __future__ import annotations

import csv
import json
import math
import subprocess
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path

from .errors import (
    CommitNotFound,
    DataError,
    DuplicateCommit,
    EmptySplit,
    MissingColumn,
    MissingTimestamp,
    RepoUnavailable,
    UnparsableLabel,
    ValidationError,
)

SOURCE_KINDS = ("manual", "automatic")


@dataclass(frozen=True)
class CommitRecord:
    commit_id: str
    project: str
    timestamp: int | None
    label: int
    patch_text: str = ""
    gs_row: dict | None = field(default=None, hash=False)
    patch_path: str | None = None


@dataclass
class Dataset:
    records: list
    project: str
    source_kind: str = "manual"

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    @property
    def labels(self):
        return [r.label for r in self.records]

    @property
    def commit_ids(self):
        return [r.commit_id for r in self.records]

    def by_id(self):
        return {r.commit_id: r for r in self.records}

    def replace_records(self, records):
        return Dataset(list(records), self.project, self.source_kind)


@dataclass
class LabelSchema:
    """Column-name map for a label CSV.

    ``label`` holds 0/1 for manual datasets and a bug count for automatic
    ones. ``timestamp`` accepts epoch seconds or ISO-8601 dates.
    """

    commit_id: str = "commit_id"
    label: str = "label"
    timestamp: str | None = None
    project: str | None = None
    patch_path: str | None = None
    gs_columns: list | str | None = None

    @classmethod
    def from_dict(cls, d):
        known = {f for f in cls.__dataclass_fields__}
        extra = set(d) - known
        if extra:
            raise ValidationError(f"unknown schema keys: {sorted(extra)}")
        return cls(**d)


def _parse_label(raw, source_kind, where):
    s = (raw or "").strip().lower()
    if source_kind == "automatic":
        try:
            count = float(s)
        except ValueError:
            raise UnparsableLabel(f"{where}: bug count {raw!r} is not a number") from None
        if not math.isfinite(count) or count < 0 or count != int(count):
            raise UnparsableLabel(f"{where}: bug count {raw!r} is not a non-negative integer")
        return 1 if count >= 1 else 0
    if s in ("1", "1.0", "true", "yes"):
        return 1
    if s in ("0", "0.0", "false", "no"):
        return 0
    raise UnparsableLabel(f"{where}: label {raw!r} is not 0/1")


def parse_timestamp(raw, where=""):
    s = (raw or "").strip()
    if not s:
        return None
    try:
        value = int(float(s))
    except ValueError:
        try:
            dt = datetime.fromisoformat(s.replace("Z", "+00:00"))
        except ValueError:
            raise DataError(f"{where}: unparsable timestamp {raw!r}") from None
        if dt.tzinfo is None:
            dt = dt.replace(tzinfo=timezone.utc)
        value = int(dt.timestamp())
    if value <= 0:
        raise DataError(f"{where}: timestamp must be positive, got {raw!r}")
    return value


def load_labels(path, schema=None, project=None, source_kind="manual"):
    """Read a label CSV into a :class:`Dataset`.

    Bug counts of automatic datasets collapse to binary labels: any count of
    one or more is buggy (label 1), zero is clean (label 0).
    """
    if source_kind not in SOURCE_KINDS:
        raise ValidationError(f"source_kind must be one of {SOURCE_KINDS}")
    schema = schema or LabelSchema()
    path = Path(path)
    if not path.is_file():
        raise DataError(f"label file not found: {path}")
    project = project or path.stem
    with path.open(newline="", encoding="utf-8-sig") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        required = [schema.commit_id, schema.label]
        required += [c for c in (schema.timestamp, schema.project, schema.patch_path) if c]
        missing = [c for c in required if c not in header]
        if missing:
            raise MissingColumn(f"{path}: missing column(s) {missing}")
        records = []
        seen = set()
        for lineno, row in enumerate(reader, start=2):
            where = f"{path.name}:{lineno}"
            cid = (row[schema.commit_id] or "").strip()
            if not cid:
                raise DataError(f"{where}: empty commit id")
            proj = (row[schema.project] or "").strip() if schema.project else project
            key = (proj, cid)
            if key in seen:
                raise DuplicateCommit(f"{where}: commit {cid} listed twice in project {proj}")
            seen.add(key)
            label = _parse_label(row[schema.label], source_kind, where)
            ts = parse_timestamp(row[schema.timestamp], where) if schema.timestamp else None
            patch_path = None
            if schema.patch_path and row[schema.patch_path]:
                patch_path = str((path.parent / row[schema.patch_path].strip()))
            records.append(CommitRecord(cid, proj, ts, label, patch_path=patch_path))
    if not records:
        raise DataError(f"{path}: no records")
    return Dataset(records, project, source_kind)


def attach_patches_from_files(dataset, patch_dir=None):
    """Fill ``patch_text`` from ``patch_path`` or ``<patch_dir>/<commit_id>.diff``."""
    out = []
    for rec in dataset:
        p = rec.patch_path
        if p is None and patch_dir is not None:
            p = str(Path(patch_dir) / f"{rec.commit_id}.diff")
        if p is None:
            out.append(rec)
            continue
        if not Path(p).is_file():
            raise DataError(f"patch file for {rec.commit_id} not found: {p}")
        text = Path(p).read_text(encoding="utf-8", errors="replace")
        out.append(replace(rec, patch_text=text, patch_path=p))
    return dataset.replace_records(out)


def attach_gs(dataset, gs_rows):
    missing = [r.commit_id for r in dataset if r.commit_id not in gs_rows]
    if missing:
        raise DataError(f"no churn metrics for commits {missing[:5]}")
    return dataset.replace_records(replace(r, gs_row=dict(gs_rows[r.commit_id])) for r in dataset)


# -- git ---------------------------------------------------------------------

def _git(repo, *args, check=True):
    try:
        proc = subprocess.run(
            ["git", "-C", str(repo), *args],
            capture_output=True,
            check=False,
        )
    except FileNotFoundError:
        raise RepoUnavailable("git executable not found") from None
    if check and proc.returncode != 0:
        msg = proc.stderr.decode("utf-8", "replace").strip()
        raise RepoUnavailable(f"git {' '.join(args)} failed in {repo}: {msg}")
    return proc


def _is_repo(repo):
    if not Path(repo).is_dir():
        return False
    return _git(repo, "rev-parse", "--git-dir", check=False).returncode == 0


def _ensure_repo(repo):
    if not _is_repo(repo):
        raise RepoUnavailable(f"not a git repository: {repo}")


def has_commit(repo, commit_id):
    return _git(repo, "cat-file", "-e", f"{commit_id}^{{commit}}", check=False).returncode == 0


def fetch_patch(repo_root, commit_id):
    """Unified diff of ``commit_id`` against its first parent.

    Merge commits produce no output from ``git diff-tree`` without ``-m``,
    which is what we want: a merge with no textual change yields ``""``.
    """
    _ensure_repo(repo_root)
    if not has_commit(repo_root, commit_id):
        raise CommitNotFound(f"{commit_id} not in {repo_root}")
    proc = _git(
        repo_root, "diff-tree", "-p", "--root", "--no-commit-id",
        "--no-color", "--no-ext-diff", "--no-renames", commit_id,
    )
    return proc.stdout.decode("utf-8", errors="replace")


def commit_timestamp(repo_root, commit_id):
    _ensure_repo(repo_root)
    if not has_commit(repo_root, commit_id):
        raise CommitNotFound(f"{commit_id} not in {repo_root}")
    out = _git(repo_root, "show", "-s", "--format=%ct", commit_id).stdout.decode().strip()
    return int(out)


def locate_commit(commit_id, submodule_roots):
    """First repository, in lexicographic path order, that contains ``commit_id``."""
    roots = [str(r) for r in submodule_roots]
    if not roots:
        raise ValidationError("submodule_roots must not be empty")
    for root in sorted(roots):
        if _is_repo(root) and has_commit(root, commit_id):
            return root
    raise CommitNotFound(f"{commit_id} not found in any of {len(roots)} repositories")


def list_repositories(root):
    """``root`` itself (if a repo) plus every immediate subdirectory that is one."""
    root = Path(root)
    found = [str(root)] if _is_repo(root) else []
    if root.is_dir():
        found += [str(p) for p in sorted(root.iterdir()) if p.is_dir() and _is_repo(p)]
    return found


def fetch_patches(dataset, repo_roots, workers=4):
    """Fill patches (and missing timestamps) for every record.

    One repository handle serves at most one fetch at a time.
    """
    roots = [str(r) for r in repo_roots]
    locks = {r: threading.Lock() for r in roots}

    def work(rec):
        repo = roots[0] if len(roots) == 1 else locate_commit(rec.commit_id, roots)
        with locks[repo]:
            text = fetch_patch(repo, rec.commit_id)
            ts = rec.timestamp if rec.timestamp is not None else commit_timestamp(repo, rec.commit_id)
        return replace(rec, patch_text=text, timestamp=ts)

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        out = list(pool.map(work, dataset.records))
    return dataset.replace_records(out)


# -- split -------------------------------------------------------------------

def split_time_ordered(dataset, train_fraction=0.7):
    """Oldest ``ceil(fraction * N)`` commits train, the rest test.

    Records are sorted by timestamp with commit id as the tie-break, so the
    result does not depend on input order.
    """
    if not 0.0 < train_fraction < 1.0:
        raise ValidationError("train_fraction must lie in (0, 1)")
    undated = [r.commit_id for r in dataset if r.timestamp is None]
    if undated:
        raise MissingTimestamp(f"{len(undated)} record(s) without timestamp, e.g. {undated[0]}")
    ordered = sorted(dataset.records, key=lambda r: (r.timestamp, r.commit_id))
    n = len(ordered)
    n_train = math.ceil(round(train_fraction * n, 9))
    if n_train < 1 or n_train >= n:
        raise EmptySplit(f"fraction {train_fraction} of {n} records leaves an empty side")
    return dataset.replace_records(ordered[:n_train]), dataset.replace_records(ordered[n_train:])


def sort_by_time(dataset):
    if any(r.timestamp is None for r in dataset):
        raise MissingTimestamp("cannot order records without timestamps")
    return dataset.replace_records(sorted(dataset.records, key=lambda r: (r.timestamp, r.commit_id)))


# -- canonical JSON lines ------------------------------------------------------

def write_dataset(dataset, path, patch_dir=None):
    """One JSON object per line; patches go to ``patch_dir/<commit_id>.diff``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if patch_dir is not None:
        Path(patch_dir).mkdir(parents=True, exist_ok=True)
    lines = []
    for rec in dataset:
        patch = rec.patch_path
        if patch_dir is not None:
            target = Path(patch_dir) / f"{rec.commit_id}.diff"
            target.write_text(rec.patch_text, encoding="utf-8")
            patch = str(target.relative_to(path.parent)) if target.is_relative_to(path.parent) else str(target)
        obj = {
            "commit_id": rec.commit_id,
            "project": rec.project,
            "timestamp": rec.timestamp,
            "label": rec.label,
            "patch": patch,
            "source_kind": dataset.source_kind,
        }
        if rec.gs_row is not None:
            obj["gs"] = rec.gs_row
        lines.append(json.dumps(obj, sort_keys=True))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def read_dataset(path, load_patches=True):
    path = Path(path)
    records = []
    source_kind = "manual"
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}:{lineno}: {exc}") from None
        source_kind = obj.get("source_kind", source_kind)
        patch_path = obj.get("patch")
        text = ""
        if patch_path is not None:
            p = Path(patch_path)
            if not p.is_absolute():
                p = path.parent / p
            patch_path = str(p)
            if load_patches:
                if not p.is_file():
                    raise DataError(f"{path}:{lineno}: patch file missing: {p}")
                text = p.read_text(encoding="utf-8", errors="replace")
        records.append(CommitRecord(
            obj["commit_id"], obj["project"], obj.get("timestamp"), int(obj["label"]),
            patch_text=text, gs_row=obj.get("gs"), patch_path=patch_path,
        ))
    if not records:
        raise DataError(f"{path}: empty dataset")
    return Dataset(records, records[0].project, source_kind)
