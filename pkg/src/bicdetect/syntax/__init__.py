"""Code fragments to normalized token trees and token sequences."""
from .diff import CodeFragment, MODES, extract_fragments, language_of
from .lexer import python_kinds, tokenize
from .parser import build_token_tree, parse_code
from .srcml import ingest_srcml
from .tree import TokenTree, VOCABULARY, emit_xml, tree_token_sequence


def token_sequence(obj):
    """Token kinds of a tree or fragment in depth-first order.

    Python fragments have no tree; they yield a flat lexical sequence.
    Fragments in languages without a lexer yield an empty sequence.
    """
    if isinstance(obj, TokenTree):
        return tree_token_sequence(obj)
    if isinstance(obj, CodeFragment):
        if obj.language == "python":
            return python_kinds(obj.text)
        if obj.language in ("java", "cpp"):
            return tree_token_sequence(build_token_tree(obj))
        return []
    raise TypeError("expected a TokenTree or CodeFragment")


__all__ = [
    "CodeFragment", "MODES", "TokenTree", "VOCABULARY", "build_token_tree",
    "emit_xml", "extract_fragments", "ingest_srcml", "language_of",
    "parse_code", "python_kinds", "token_sequence", "tokenize",
    "tree_token_sequence",
]
