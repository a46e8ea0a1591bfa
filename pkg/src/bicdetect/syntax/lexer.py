"""Regex lexers for Java/C-family code and a flat lexer for Python.

Comments, preprocessor lines and whitespace never produce tokens, which is
what makes the token tree insensitive to formatting and comment edits.
"""
from __future__ import annotations

import keyword
import re

_C_OPS = [
    ">>>=", "<<=", ">>=", ">>>", "->*", "...", "->", "::", "++", "--", "&&", "||",
    "==", "!=", "<=", ">=", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=",
    "<<", ">>", ".*",
    "+", "-", "*", "/", "%", "=", "<", ">", "!", "~", "?", ":", "&", "|", "^",
    ".", "@", "(", ")", "{", "}", "[", "]", ";", ",",
]
_PY_OPS = [
    "**=", "//=", ">>=", "<<=", "...", "->", ":=", "**", "//", "==", "!=", "<=",
    ">=", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "@=", "<<", ">>",
    "+", "-", "*", "/", "%", "=", "<", ">", "!", "~", ":", "&", "|", "^",
    ".", "@", "(", ")", "{", "}", "[", "]", ";", ",",
]


def _ops_pattern(ops):
    return "|".join(re.escape(o) for o in sorted(ops, key=len, reverse=True))


_C_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<com>//[^\n]*|/\*.*?(?:\*/|\Z))
  | (?P<str>\"\"\"[\s\S]*?(?:\"\"\"|\Z)|[uUL8]{0,2}R\"(?P<delim>[^(\s]*)\([\s\S]*?\)(?P=delim)\"|[uUL8]{0,2}"(?:\\.|[^"\\\n])*"?)
  | (?P<chr>'(?:\\.|[^'\\\n])*'?)
  | (?P<num>(?:0[xX][0-9a-fA-F_']+|0[bB][01_']+|(?:\d[\d_']*(?:\.[\d_']*)?|\.\d[\d_']*)(?:[eEpP][+-]?\d+)?)[a-zA-Z]*)
  | (?P<id>[A-Za-z_$][\w$]*)
  | (?P<op>""" + _ops_pattern(_C_OPS) + r""")
  | (?P<other>.)
    """,
    re.M | re.S | re.X,
)

_PP_RE = re.compile(r"^[ \t]*#(?:\\\n|[^\n])*", re.M)

_PY_RE = re.compile(
    r"""
    (?P<ws>\s+|\\\n)
  | (?P<com>\#[^\n]*)
  | (?P<str>(?:[rRbBuUfF]{1,2})?(?:'''[\s\S]*?(?:'''|\Z)|\"\"\"[\s\S]*?(?:\"\"\"|\Z)|'(?:\\.|[^'\\\n])*'?|"(?:\\.|[^"\\\n])*"?))
  | (?P<num>(?:0[xXoObB][0-9a-fA-F_]+|(?:\d[\d_]*(?:\.[\d_]*)?|\.\d[\d_]*)(?:[eE][+-]?\d+)?)[jJ]?)
  | (?P<id>[^\W\d]\w*)
  | (?P<op>""" + _ops_pattern(_PY_OPS) + r""")
  | (?P<other>.)
    """,
    re.M | re.S | re.X,
)

JAVA_KEYWORDS = frozenset("""
abstract assert boolean break byte case catch char class const continue default
do double else enum extends final finally float for goto if implements import
instanceof int interface long native new package private protected public
return short static strictfp super switch synchronized this throw throws
transient try void volatile while
""".split())

CPP_KEYWORDS = frozenset("""
alignas alignof asm auto bool break case catch char char8_t char16_t char32_t
class const consteval constexpr constinit const_cast continue co_await
co_return co_yield decltype default delete do double dynamic_cast else enum
explicit export extern float for friend goto if inline int long mutable
namespace new noexcept operator private protected public register
reinterpret_cast requires return short signed sizeof static static_assert
static_cast struct switch template this thread_local throw try typedef typeid
typename union unsigned using virtual void volatile wchar_t while override final
""".split())

LITERAL_WORDS = frozenset({"true", "false", "null", "nullptr", "NULL"})


def tokenize(text, language="java"):
    """Tokens as ``(kind, text)``; kinds are id, kw, num, str, chr, lit, op."""
    if language == "python":
        raise ValueError("use python_kinds() for python fragments")
    kws = CPP_KEYWORDS if language == "cpp" else JAVA_KEYWORDS
    out = []
    text = _PP_RE.sub("", text)
    for m in _C_RE.finditer(text):
        kind = m.lastgroup
        if kind in ("ws", "com"):
            continue
        tok = m.group(0)
        if kind == "id":
            if tok in LITERAL_WORDS:
                kind = "lit"
            elif tok in kws:
                kind = "kw"
        elif kind == "other":
            if tok.isspace() or tok == "\\":
                continue
            kind = "op"
        out.append((kind, tok))
    return out


_PY_LITERAL_WORDS = frozenset({"True", "False", "None"})
_PY_KEYWORDS = frozenset(keyword.kwlist) - _PY_LITERAL_WORDS


def python_kinds(text):
    """Flat normalized kinds for python code: name, operator, literal, keyword text."""
    out = []
    for m in _PY_RE.finditer(text):
        kind = m.lastgroup
        if kind in ("ws", "com"):
            continue
        tok = m.group(0)
        if kind == "id":
            if tok in _PY_LITERAL_WORDS:
                out.append("literal")
            elif tok in _PY_KEYWORDS:
                out.append(tok)
            else:
                out.append("name")
        elif kind in ("str", "num"):
            out.append("literal")
        else:
            if tok.isspace():
                continue
            out.append("operator")
    return out
