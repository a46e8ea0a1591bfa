"""Normalized token tree: element kinds only, leaf text discarded."""
from __future__ import annotations

from collections import Counter
import xml.etree.ElementTree as ET

# Closed element vocabulary. The first block is the core srcML subset the
# features are defined over; the second holds srcML elements the built-in
# parser also emits so that parsed trees and ingested srcML agree.
CORE_KINDS = (
    "unit", "if_stmt", "if", "else", "condition", "expr", "expr_stmt", "name",
    "operator", "literal", "block", "decl_stmt", "decl", "type", "call",
    "argument_list", "argument", "while", "for", "switch", "case", "function",
    "parameter_list", "parameter", "return",
)
EXTRA_KINDS = (
    "block_content", "init", "index", "control", "incr", "range", "ternary",
    "then", "do", "break", "continue", "default", "throw", "try", "catch",
    "finally", "class", "specifier", "modifier", "empty_stmt",
)
VOCABULARY = frozenset(CORE_KINDS + EXTRA_KINDS)

# token_sequence markers: keyword-bearing elements emit their kind on entry,
# bracketed elements emit ``<kind>-open`` / ``<kind>-close`` around children.
KEYWORD_KINDS = frozenset({
    "if", "else", "while", "for", "do", "switch", "case", "default", "return",
    "break", "continue", "throw", "try", "catch", "finally", "class",
})
BRACKET_KINDS = frozenset({
    "condition", "block", "argument_list", "parameter_list", "control", "index",
})


class TokenTree:
    """Arena of (kind, ordered children); node 0 is the ``unit`` root."""

    __slots__ = ("kinds", "children")

    def __init__(self):
        self.kinds = ["unit"]
        self.children = [[]]

    @property
    def root(self):
        return 0

    def add(self, kind, parent):
        if kind not in VOCABULARY:
            raise ValueError(f"kind {kind!r} outside the element vocabulary")
        node = len(self.kinds)
        self.kinds.append(kind)
        self.children.append([])
        self.children[parent].append(node)
        return node

    def __len__(self):
        return len(self.kinds)

    def preorder(self):
        out = []
        stack = [0]
        while stack:
            n = stack.pop()
            out.append(n)
            stack.extend(reversed(self.children[n]))
        return out

    def parents(self):
        par = [-1] * len(self.kinds)
        for n, ch in enumerate(self.children):
            for c in ch:
                par[c] = n
        return par

    def leaves(self):
        """Leaf ids in depth-first left-to-right order; the bare root is not a leaf."""
        return [n for n in self.preorder() if n != 0 and not self.children[n]]

    def leaf_count(self):
        return len(self.leaves())

    def kind_counts(self):
        return Counter(self.kinds[n] for n in self.preorder())

    def kind_sequence(self):
        return [self.kinds[n] for n in self.preorder()]

    def nested(self, node=0):
        """Hashable nested (kind, children) form; equality ignores arena ids."""
        # iterative post-order to survive deep trees
        done = {}
        stack = [(node, False)]
        while stack:
            n, expanded = stack.pop()
            if expanded:
                done[n] = (self.kinds[n], tuple(done[c] for c in self.children[n]))
            else:
                stack.append((n, True))
                stack.extend((c, False) for c in self.children[n])
        return done[node]

    def __eq__(self, other):
        if not isinstance(other, TokenTree):
            return NotImplemented
        return self.nested() == other.nested()

    def __hash__(self):
        return hash(self.nested())

    def __repr__(self):
        return f"TokenTree(nodes={len(self.kinds)}, leaves={self.leaf_count()})"

    def validate(self):
        seen = set()
        for n in self.preorder():
            if n in seen:
                raise ValueError("node reachable twice: tree has a cycle or shared child")
            seen.add(n)
            if self.kinds[n] not in VOCABULARY:
                raise ValueError(f"kind {self.kinds[n]!r} outside the element vocabulary")
        if self.kinds[0] != "unit":
            raise ValueError("root must be a unit")
        return True


def tree_token_sequence(tree):
    par = tree.parents()
    out = []
    stack = [(0, False)]
    while stack:
        n, closing = stack.pop()
        kind = tree.kinds[n]
        if closing:
            out.append(kind + "-close")
            continue
        ch = tree.children[n]
        if n != 0 and not ch:
            out.append(kind)
            continue
        bracketed = kind in BRACKET_KINDS and not (
            kind == "condition" and par[n] >= 0 and tree.kinds[par[n]] == "control"
        )
        if bracketed:
            out.append(kind + "-open")
            stack.append((n, True))
        elif kind in KEYWORD_KINDS:
            out.append(kind)
        stack.extend((c, False) for c in reversed(ch))
    return out


def emit_xml(tree):
    """Serialize with the same element names and no text."""
    def build(n, parent_el):
        el = ET.Element(tree.kinds[n]) if parent_el is None else ET.SubElement(parent_el, tree.kinds[n])
        return el

    root_el = build(0, None)
    stack = [(0, root_el)]
    while stack:
        n, el = stack.pop()
        for c in tree.children[n]:
            stack.append((c, build(c, el)))
    return ET.tostring(root_el, encoding="unicode")
