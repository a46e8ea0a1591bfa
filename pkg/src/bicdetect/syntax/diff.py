"""Unified-diff reader producing per-hunk code fragments."""
from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import PurePosixPath

from ..errors import MalformedDiff, ValidationError

LANGUAGE_BY_EXT = {
    ".java": "java",
    ".c": "cpp", ".h": "cpp", ".cc": "cpp", ".cpp": "cpp", ".cxx": "cpp",
    ".c++": "cpp", ".hh": "cpp", ".hpp": "cpp", ".hxx": "cpp", ".h++": "cpp",
    ".ipp": "cpp", ".inl": "cpp",
    ".py": "python", ".pyi": "python",
}
MODES = ("added_only", "added_plus_context")

_HUNK_RE = re.compile(r"^@@ -(\d+)(?:,(\d+))? \+(\d+)(?:,(\d+))? @@")


@dataclass(frozen=True)
class CodeFragment:
    language: str
    text: str
    origin: tuple = ("", "", 0)  # (commit_id, path, hunk index within file)


def language_of(path):
    return LANGUAGE_BY_EXT.get(PurePosixPath(path).suffix.lower(), "unknown")


def _strip_prefix(p):
    p = p.strip()
    if "\t" in p:
        p = p.split("\t", 1)[0]
    if p.startswith('"') and p.endswith('"'):
        p = p[1:-1]
    if p.startswith(("a/", "b/")):
        p = p[2:]
    return p


def extract_fragments(patch_text, mode="added_only", commit_id=""):
    """Split a unified diff into source fragments, one per hunk.

    ``added_only`` keeps ``+`` lines, ``added_plus_context`` also keeps
    context lines; removed lines are never kept. Files whose extension is
    not a known source language are skipped, as are hunks that add nothing.
    """
    if mode not in MODES:
        raise ValidationError(f"mode must be one of {MODES}")
    lines = patch_text.splitlines()
    fragments = []
    old_path = new_path = None
    hunk_no = 0
    i = 0
    n = len(lines)
    while i < n:
        line = lines[i]
        if line.startswith("diff --git "):
            old_path = new_path = None
            hunk_no = 0
            i += 1
            continue
        if line.startswith("--- ") and i + 1 < n and lines[i + 1].startswith("+++ "):
            old_path = _strip_prefix(line[4:])
            new_path = _strip_prefix(lines[i + 1][4:])
            hunk_no = 0
            i += 2
            continue
        if line.startswith("@@"):
            m = _HUNK_RE.match(line)
            if m is None:
                raise MalformedDiff(f"unparsable hunk header: {line!r}")
            old_left = int(m.group(2)) if m.group(2) is not None else 1
            new_left = int(m.group(4)) if m.group(4) is not None else 1
            i += 1
            kept = []
            while i < n and (old_left > 0 or new_left > 0):
                body = lines[i]
                tag = body[:1]
                if tag == "+":
                    kept.append(body[1:])
                    new_left -= 1
                elif tag == "-":
                    old_left -= 1
                elif tag == " " or body == "":
                    if mode == "added_plus_context":
                        kept.append(body[1:])
                    old_left -= 1
                    new_left -= 1
                elif tag == "\\":
                    pass
                else:
                    raise MalformedDiff(
                        f"hunk ended early near line {i + 1}: {body[:40]!r}"
                    )
                i += 1
            # trailing "\ No newline at end of file"
            while i < n and lines[i].startswith("\\"):
                i += 1
            path = new_path if new_path not in (None, "/dev/null") else old_path
            if path is None:
                raise MalformedDiff("hunk before any file header")
            lang = language_of(path)
            text = "\n".join(kept)
            if lang != "unknown" and text.strip():
                fragments.append(CodeFragment(lang, text, (commit_id, path, hunk_no)))
            hunk_no += 1
            continue
        i += 1
    return fragments
