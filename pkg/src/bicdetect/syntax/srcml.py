"""Read srcML XML into a token tree.

Namespaces are stripped, comments and preprocessor elements dropped and
text discarded. Element names outside the vocabulary go through an alias
table; anything still unknown is spliced out (children lifted into the
parent) unless ``strict`` is set.
"""
from __future__ import annotations

import xml.etree.ElementTree as ET

from ..errors import MalformedXml, UnknownElement
from .tree import TokenTree, VOCABULARY

DEFAULT_ALIASES = {
    "constructor": "function",
    "function_decl": "function",
    "constructor_decl": "function",
    "destructor": "function",
    "destructor_decl": "function",
    "struct": "class",
    "interface": "class",
    "enum": "class",
    "union": "class",
    "annotation_defn": "class",
}
_DROPPED = frozenset({"comment", "escape", "annotation", "import", "package"})
_DROPPED_NS = ("http://www.srcML.org/srcML/cpp",)


def _local(tag):
    if tag.startswith("{"):
        ns, _, name = tag[1:].partition("}")
        return ns, name
    return "", tag


def ingest_srcml(xml_text, strict=False, aliases=None):
    try:
        root = ET.fromstring(xml_text)
    except ET.ParseError as exc:
        raise MalformedXml(str(exc)) from None
    alias = dict(DEFAULT_ALIASES)
    if aliases:
        alias.update(aliases)
    ns, name = _local(root.tag)
    if name != "unit":
        raise MalformedXml(f"root element is {name!r}, expected unit")
    tree = TokenTree()
    # units nested inside an archive unit are flattened into the one root
    stack = [(c, 0) for c in reversed(list(root))]
    while stack:
        el, parent = stack.pop()
        if not isinstance(el.tag, str):
            continue  # comments / processing instructions
        ns, name = _local(el.tag)
        if ns in _DROPPED_NS or name in _DROPPED:
            continue
        name = alias.get(name, name)
        if name == "unit":
            node = parent
        elif name in VOCABULARY:
            node = tree.add(name, parent)
        elif strict:
            raise UnknownElement(f"element {name!r} outside the vocabulary")
        else:
            node = parent
        stack.extend((c, node) for c in reversed(list(el)))
    return tree
