"""Recursive-descent parser from Java/C-family fragments to token trees.

Fragments are partial code taken from diff hunks, so parsing never fails:
stray closers are skipped, end of input closes whatever is open and
anything unrecognized becomes an ``expr_stmt``.
"""
from __future__ import annotations

from ..errors import UnsupportedLanguage
from .diff import CodeFragment
from .lexer import tokenize
from .tree import TokenTree

PRIMITIVES = frozenset("""
int long short byte char boolean float double void bool unsigned signed auto
wchar_t char8_t char16_t char32_t
""".split())
MODIFIERS = frozenset("""
public private protected static final abstract synchronized native transient
volatile strictfp const constexpr consteval constinit virtual inline extern
mutable explicit register thread_local friend typename default
""".split())
CLASS_KW = frozenset({"class", "interface", "enum", "struct", "union"})
STMT_KW = frozenset("""
if else for while do switch case default return break continue throw try catch
finally class interface enum struct import package namespace using template
""".split())
NAME_KW = frozenset({"this", "super", "class", "new", "operator"}) | PRIMITIVES
_FUNC_TAIL_KW = frozenset({"throws", "const", "override", "final", "noexcept"})
_MAX_DEPTH = 150
_EOF = ("eof", "")


class _Parser:
    def __init__(self, tokens, tree, language):
        self.toks = list(tokens)
        self.pos = 0
        self.tree = tree
        self.lang = language
        self.depth = 0

    # token helpers
    def peek(self, k=0):
        i = self.pos + k
        return self.toks[i] if i < len(self.toks) else _EOF

    def tok(self, p):
        return self.toks[p] if p < len(self.toks) else _EOF

    def op(self, text, k=0):
        t = self.peek(k)
        return t[0] == "op" and t[1] == text

    def kw(self, text, k=0):
        t = self.peek(k)
        return t[0] == "kw" and t[1] == text

    def eof(self):
        return self.pos >= len(self.toks)

    def advance(self, n=1):
        self.pos += n

    def add(self, kind, parent):
        return self.tree.add(kind, parent)

    # lookahead scanners, positions only, no nodes
    def match_close(self, p, open_, close):
        """Index after the token closing the bracket at ``p``, or None."""
        depth = 0
        while p < len(self.toks):
            k, t = self.toks[p]
            if k == "op":
                if t == open_:
                    depth += 1
                elif t == close:
                    depth -= 1
                    if depth == 0:
                        return p + 1
            p += 1
        return None

    def scan_angle(self, p):
        depth = 0
        while p < len(self.toks):
            k, t = self.toks[p]
            if k == "op":
                if t == "<":
                    depth += 1
                elif t in (">", ">>", ">>>"):
                    depth -= len(t)
                    if depth <= 0:
                        return p + 1
                elif t not in (",", ".", "::", "?", "[", "]", "&", "*", "&&"):
                    return None
            elif k == "kw":
                if t not in PRIMITIVES and t not in ("extends", "super", "const", "typename"):
                    return None
            elif k not in ("id", "num"):
                return None
            p += 1
        return None

    def scan_type(self, p):
        k, t = self.tok(p)
        if k == "kw" and t in PRIMITIVES:
            while self.tok(p)[0] == "kw" and self.tok(p)[1] in PRIMITIVES:
                p += 1
        elif k == "id" or (k == "op" and t == "::" and self.tok(p + 1)[0] == "id"):
            if k == "op":
                p += 1
            p += 1
            while True:
                if self.tok(p) in (("op", "."), ("op", "::")) and self.tok(p + 1)[0] == "id":
                    p += 2
                elif self.tok(p) == ("op", "<"):
                    q = self.scan_angle(p)
                    if q is None:
                        return None
                    p = q
                else:
                    break
        else:
            return None
        while self.tok(p) == ("op", "[") and self.tok(p + 1) == ("op", "]"):
            p += 2
        return p

    def scan_declarator(self, p):
        """Position after a (qualified) declarator name, or None."""
        while self.tok(p) in (("op", "*"), ("op", "&"), ("op", "&&")):
            p += 1
        if self.tok(p) == ("op", "~"):
            p += 1
        if self.tok(p)[0] != "id":
            if self.tok(p) == ("kw", "operator"):
                p += 1
                while self.tok(p)[0] == "op" and self.tok(p)[1] != "(":
                    p += 1
                if self.tok(p) == ("op", "(") and self.tok(p + 1) == ("op", ")") \
                        and self.tok(p + 2) == ("op", "("):
                    p += 2
                return p
            return None
        p += 1
        while self.tok(p) == ("op", "::") and self.tok(p + 1)[0] in ("id", "op"):
            nxt = self.tok(p + 1)
            if nxt == ("op", "~"):
                p += 3
            elif nxt[0] == "id":
                p += 2
            else:
                break
        return p

    def ctor_like(self, p):
        """True if a type-less function definition starts at ``p``."""
        q = self.scan_declarator(p)
        if q is None or self.tok(q) != ("op", "("):
            return False
        r = self.match_close(q, "(", ")")
        if r is None:
            return False
        k, t = self.tok(r)
        return (k == "op" and t in ("{", ":")) or (k == "kw" and t in _FUNC_TAIL_KW)

    # statements
    def parse_unit(self):
        while not self.eof():
            before = self.pos
            self.statement(0)
            if self.pos == before:
                self.advance()

    def statement(self, parent):
        if self.depth > _MAX_DEPTH:
            self.advance()
            return
        self.depth += 1
        try:
            self._statement(parent)
        finally:
            self.depth -= 1

    def _statement(self, parent):
        k, t = self.peek()
        if k == "eof":
            return
        if k == "op":
            if t == "{":
                self.block(parent)
                return
            if t == ";":
                self.advance()
                self.add("empty_stmt", parent)
                return
            if t == "}":
                self.advance()
                return
            if t == "@" and not self.kw("interface", 1):
                self.skip_annotation()
                return
            if t == "@":
                self.advance()
                self.class_decl(parent, [])
                return
        if k == "kw":
            if t == "default" and (self.op(":", 1) or self.op("->", 1)):
                self.add("default", parent)
                self.advance(2)
                return
            handler = self._KW_HANDLERS.get(t)
            if handler is not None:
                handler(self, parent)
                return
        if k == "id" and self.op(":", 1):
            self.advance(2)  # label
            return
        specs = self.specifiers()
        if specs is None:
            return
        if self.peek()[0] == "kw" and self.peek()[1] in CLASS_KW:
            self.class_decl(parent, specs)
            return
        if self.op("<"):
            end = self.scan_angle(self.pos)
            if end is not None:
                self.pos = end
        if self.op("{") and specs:
            self.block(parent)
            return
        if self.declaration_or_function(parent, specs):
            return
        if specs:
            return
        self.expr_stmt(parent)

    def specifiers(self):
        """Consume modifiers and annotations; None if an access label was eaten."""
        specs = []
        while True:
            k, t = self.peek()
            if k == "kw" and t in MODIFIERS:
                if t == "default" and (self.op(":", 1) or self.op("->", 1)):
                    break
                if self.op(":", 1):
                    self.advance(2)  # C++ access label
                    return None
                specs.append(t)
                self.advance()
            elif k == "op" and t == "@" and not self.kw("interface", 1):
                self.skip_annotation()
            else:
                break
        return specs

    def skip_annotation(self):
        self.advance()
        if self.peek()[0] in ("id", "kw"):
            self.advance()
        while self.op(".") and self.peek(1)[0] == "id":
            self.advance(2)
        if self.op("("):
            end = self.match_close(self.pos, "(", ")")
            self.pos = end if end is not None else len(self.toks)

    def declaration_or_function(self, parent, specs):
        start = self.pos
        if self.ctor_like(start):
            self.function(parent, specs, None)
            return True
        tend = self.scan_type(start)
        if tend is None:
            return False
        q = self.scan_declarator(tend)
        if q is None:
            return False
        k, t = self.tok(q)
        if k == "op" and t == "(":
            r = self.match_close(q, "(", ")")
            if r is None:
                self.function(parent, specs, (start, tend))
                return True
            rk, rt = self.tok(r)
            if (rk == "op" and rt in ("{", ";", "->", "=", ":")) or (rk == "kw" and rt in _FUNC_TAIL_KW) \
                    or rk == "eof":
                self.function(parent, specs, (start, tend))
                return True
            return False
        if (k == "op" and t in ("=", ";", ",", "[", ":", "{")) or k == "eof":
            self.declaration(parent, specs, (start, tend))
            return True
        return False

    def type_node(self, parent, specs, span):
        ty = self.add("type", parent)
        for _ in specs:
            self.add("specifier", ty)
        start, end = span
        self.pos = start
        self.type_name(ty, end)
        while self.peek() in (("op", "*"), ("op", "&"), ("op", "&&")):
            self.add("modifier", ty)
            self.advance()
        return ty

    def type_name(self, parent, end=None):
        """Emit a type name; compound when qualified, generic or array."""
        k, t = self.peek()
        if k == "kw" and t in PRIMITIVES:
            while self.peek()[0] == "kw" and self.peek()[1] in PRIMITIVES:
                self.add("name", parent)
                self.advance()
            self.array_dims(parent)
            return
        stop = end if end is not None else (self.scan_type(self.pos) or self.pos + 1)
        compound = stop - self.pos > 1
        if not compound:
            self.add("name", parent)
            self.advance()
            return
        nm = self.add("name", parent)
        if self.op("::"):
            self.add("operator", nm)
            self.advance()
        while self.pos < stop:
            k, t = self.peek()
            if k == "id":
                self.add("name", nm)
                self.advance()
            elif k == "op" and t in (".", "::"):
                self.add("operator", nm)
                self.advance()
            elif k == "op" and t == "<":
                self.generic_args(nm)
            elif k == "op" and t == "[":
                self.add("index", nm)
                self.advance(2)
            else:
                break

    def array_dims(self, parent):
        while self.op("[") and self.op("]", 1):
            self.add("index", parent)
            self.advance(2)

    def generic_args(self, parent):
        al = self.add("argument_list", parent)
        self.advance()
        if self.op(">"):
            self.advance()
            return
        while not self.eof():
            k, t = self.peek()
            if k == "op" and t == ">":
                self.advance()
                return
            if k == "op" and t in (">>", ">>>"):
                # split the shift token: close one level, leave the rest
                self.toks[self.pos] = ("op", t[1:])
                return
            arg = self.add("argument", al)
            if self.op("?"):
                self.add("name", arg)
                self.advance()
                if self.peek()[0] == "kw" and self.peek()[1] in ("extends", "super"):
                    self.advance()
                    self.type_name(arg)
            elif k == "num":
                self.add("literal", arg)
                self.advance()
            elif (k == "id") or (k == "kw" and t in PRIMITIVES) or (k == "op" and t == "::"):
                self.type_name(arg)
                while self.peek() in (("op", "*"), ("op", "&")):
                    self.add("modifier", arg)
                    self.advance()
            else:
                self.advance()
            if self.op(","):
                self.advance()

    def declarator_name(self, parent):
        """Declarator name; qualified or subscripted names become compound."""
        while self.peek() in (("op", "*"), ("op", "&"), ("op", "&&")):
            self.advance()
        end = self.scan_declarator(self.pos)
        if end is None:
            return
        compound = end - self.pos > 1 or self.op("[", end - self.pos)
        if not compound:
            self.add("name", parent)
            self.advance()
            return
        nm = self.add("name", parent)
        while self.pos < end:
            k, _ = self.peek()
            self.add("name" if k in ("id", "kw") else "operator", nm)
            self.advance()
        while self.op("["):
            ix = self.add("index", nm)
            self.advance()
            if not self.op("]"):
                self.expr(ix, {"]"})
            if self.op("]"):
                self.advance()

    def declaration(self, parent, specs, span, in_control=False):
        ds = self.add("decl_stmt", parent) if not in_control else parent
        first = True
        while True:
            d = self.add("decl", ds)
            if first:
                self.type_node(d, specs, span)
            else:
                ty = self.add("type", d)
                while self.peek() in (("op", "*"), ("op", "&")):
                    self.add("modifier", ty)
                    self.advance()
            self.declarator_name(d)
            if self.op(":") and in_control:
                rg = self.add("range", d)
                self.advance()
                self.expr(rg, {")"})
                return "range"
            if self.op(":"):
                # bit-field width
                self.advance()
                self.expr(d, {",", ";"})
            if self.op("="):
                init = self.add("init", d)
                self.advance()
                self.expr(init, {",", ";", ")"} if in_control else {",", ";"})
            elif self.op("(") or (self.op("{") and not first):
                if self.op("("):
                    self.argument_list(d)
                else:
                    self.init_block(d)
            elif self.op("{"):
                self.init_block(d)
            if self.op(","):
                self.advance()
                first = False
                continue
            break
        if not in_control and self.op(";"):
            self.advance()
        return "decl"

    def function(self, parent, specs, span):
        fn = self.add("function", parent)
        if span is not None:
            self.type_node(fn, specs, span)
        elif specs:
            ty = self.add("type", fn)
            for _ in specs:
                self.add("specifier", ty)
        self.declarator_name(fn)
        if self.op("("):
            self.parameter_list(fn)
        # trailing qualifiers, throws clauses, trailing return, init lists
        while not self.eof():
            k, t = self.peek()
            if k == "op" and t == "{":
                self.block(fn)
                return
            if k == "op" and t == ";":
                self.advance()
                return
            if k == "op" and t == "}":
                return
            if k == "op" and t == "(":
                end = self.match_close(self.pos, "(", ")")
                self.pos = end if end is not None else len(self.toks)
                continue
            self.advance()

    def parameter_list(self, parent):
        pl = self.add("parameter_list", parent)
        self.advance()
        if self.op(")"):
            self.advance()
            return
        while not self.eof():
            if self.op("{") or self.op(";") or self.op("}"):
                return
            prm = self.add("parameter", pl)
            specs = self.specifiers() or []
            tend = self.scan_type(self.pos)
            if tend is not None:
                d = self.add("decl", prm)
                self.type_node(d, specs, (self.pos, tend))
                if self.op("..."):
                    self.advance()
                if self.peek()[0] == "id":
                    self.declarator_name(d)
                    self.array_dims(d)
                if self.op("="):
                    init = self.add("init", d)
                    self.advance()
                    self.expr(init, {",", ")"})
            # skip anything else up to the separator
            depth = 0
            while not self.eof():
                k, t = self.peek()
                if k == "op" and t in ("(", "<", "["):
                    depth += 1
                elif k == "op" and t in (")", ">", "]") and depth > 0:
                    depth -= 1
                elif k == "op" and t in (",", ")") and depth == 0:
                    break
                elif k == "op" and t in ("{", ";", "}"):
                    return
                self.advance()
            if self.op(","):
                self.advance()
                continue
            if self.op(")"):
                self.advance()
            return

    def block(self, parent):
        b = self.add("block", parent)
        bc = self.add("block_content", b)
        self.advance()
        self.statements_until_close(bc)
        return b

    def statements_until_close(self, parent):
        while not self.eof():
            if self.op("}"):
                self.advance()
                return
            before = self.pos
            self.statement(parent)
            if self.pos == before:
                self.advance()

    def body(self, parent):
        if self.eof():
            return
        if self.op("{"):
            self.block(parent)
            return
        b = self.add("block", parent)
        bc = self.add("block_content", b)
        before = self.pos
        self.statement(bc)
        if self.pos == before:
            self.advance()

    def condition(self, parent):
        cond = self.add("condition", parent)
        if self.op("("):
            self.advance()
            self.expr(cond, {")"})
            if self.op(")"):
                self.advance()
        else:
            self.expr(cond, {"{"})
        return cond

    def expr_stmt(self, parent):
        s = self.add("expr_stmt", parent)
        self.expr(s, set())
        if self.op(";"):
            self.advance()

    # keyword statements
    def kw_if(self, parent):
        ifs = self.add("if_stmt", parent)
        self.if_clause(ifs)
        self.else_chain(ifs)

    def if_clause(self, ifs):
        i = self.add("if", ifs)
        self.advance()
        if self.kw("constexpr"):
            self.advance()
        self.condition(i)
        self.body(i)

    def else_chain(self, ifs):
        while self.kw("else"):
            if self.kw("if", 1):
                self.advance()
                self.if_clause(ifs)
                continue
            e = self.add("else", ifs)
            self.advance()
            self.body(e)
            return

    def kw_else(self, parent):
        # dangling else: the matching if lies before the fragment
        ifs = self.add("if_stmt", parent)
        self.else_chain(ifs)

    def kw_while(self, parent):
        w = self.add("while", parent)
        self.advance()
        self.condition(w)
        if self.op(";"):
            self.advance()
            return
        self.body(w)

    def kw_do(self, parent):
        d = self.add("do", parent)
        self.advance()
        self.body(d)
        if self.kw("while"):
            self.advance()
            self.condition(d)
        if self.op(";"):
            self.advance()

    def kw_for(self, parent):
        f = self.add("for", parent)
        self.advance()
        if self.peek()[0] == "id" and self.peek()[1] == "each":
            self.advance()
        if self.op("("):
            ctl = self.add("control", f)
            self.advance()
            init = self.add("init", ctl)
            specs = self.specifiers() or []
            tend = self.scan_type(self.pos)
            ranged = False
            if tend is not None and self.scan_declarator(tend) is not None:
                ranged = self.declaration(init, specs, (self.pos, tend), in_control=True) == "range"
            elif not self.op(";"):
                self.expr(init, {";", ")"})
            if not ranged:
                if self.op(";"):
                    self.advance()
                cond = self.add("condition", ctl)
                if not self.op(";") and not self.op(")"):
                    self.expr(cond, {";", ")"})
                if self.op(";"):
                    self.advance()
                incr = self.add("incr", ctl)
                if not self.op(")"):
                    self.expr(incr, {")"})
            if self.op(")"):
                self.advance()
        self.body(f)

    def kw_switch(self, parent):
        sw = self.add("switch", parent)
        self.advance()
        self.condition(sw)
        if self.op("{"):
            self.block(sw)

    def kw_case(self, parent):
        c = self.add("case", parent)
        self.advance()
        self.expr(c, {":", "->"})
        if self.op(":") or self.op("->"):
            self.advance()

    def kw_default(self, parent):
        # ``default`` used as a modifier (interface methods)
        specs = self.specifiers()
        if specs is None or not self.declaration_or_function(parent, specs):
            if not specs:
                self.advance()

    def kw_return(self, parent):
        r = self.add("return", parent)
        self.advance()
        if not (self.op(";") or self.op("}") or self.eof()):
            self.expr(r, {";"})
        if self.op(";"):
            self.advance()

    def kw_jump(self, parent):
        self.add(self.peek()[1], parent)
        self.advance()
        if self.peek()[0] == "id":
            self.advance()
        if self.op(";"):
            self.advance()

    def kw_throw(self, parent):
        t = self.add("throw", parent)
        self.advance()
        if not (self.op(";") or self.op("}") or self.eof()):
            self.expr(t, {";"})
        if self.op(";"):
            self.advance()

    def kw_try(self, parent):
        t = self.add("try", parent)
        if self.kw("try"):
            self.advance()
            if self.op("("):
                init = self.add("init", t)
                self.advance()
                while not self.eof() and not self.op(")") and not self.op("{"):
                    before = self.pos
                    specs = self.specifiers() or []
                    tend = self.scan_type(self.pos)
                    if tend is not None and self.scan_declarator(tend) is not None:
                        self.declaration(init, specs, (self.pos, tend), in_control=True)
                    else:
                        self.expr(init, {";", ")"})
                    if self.op(";"):
                        self.advance()
                    if self.pos == before:
                        self.advance()
                if self.op(")"):
                    self.advance()
            if self.op("{"):
                self.block(t)
        while self.kw("catch"):
            c = self.add("catch", t)
            self.advance()
            if self.op("("):
                self.parameter_list(c)
            if self.op("{"):
                self.block(c)
        if self.kw("finally"):
            fin = self.add("finally", t)
            self.advance()
            if self.op("{"):
                self.block(fin)

    def kw_class(self, parent):
        self.class_decl(parent, [])

    def class_decl(self, parent, specs):
        c = self.add("class", parent)
        for _ in specs:
            self.add("specifier", c)
        self.advance()
        if self.peek()[0] == "id":
            if self.op("<", 1):
                nm = self.add("name", c)
                self.add("name", nm)
                self.advance()
                if self.scan_angle(self.pos) is not None:
                    self.generic_args(nm)
            else:
                self.add("name", c)
                self.advance()
        while not self.eof() and not self.op("{") and not self.op(";") and not self.op("}"):
            if self.op("("):
                # records and annotation arguments
                end = self.match_close(self.pos, "(", ")")
                self.pos = end if end is not None else len(self.toks)
                continue
            self.advance()
        if self.op("{"):
            self.block(c)
        if self.op(";"):
            self.advance()

    def kw_skip_to_semicolon(self, parent):
        while not self.eof() and not self.op(";"):
            self.advance()
        self.advance()

    def kw_namespace(self, parent):
        self.advance()
        while not self.eof() and not self.op("{") and not self.op(";"):
            self.advance()
        if self.op("{"):
            self.advance()
            self.statements_until_close(parent)
        elif self.op(";"):
            self.advance()

    def kw_template(self, parent):
        self.advance()
        if self.op("<"):
            end = self.scan_angle(self.pos)
            if end is None:
                end = self.match_close(self.pos, "<", ">")
            self.pos = end if end is not None else len(self.toks)

    def kw_synchronized(self, parent):
        if not self.op("(", 1):
            specs = self.specifiers() or []
            if not self.declaration_or_function(parent, specs):
                self.expr_stmt(parent)
            return
        self.advance()
        s = self.add("expr_stmt", parent)
        e = self.add("expr", s)
        self.expr_items(e, set(), single_group=True)
        if self.op("{"):
            self.block(parent)

    _KW_HANDLERS = {
        "if": kw_if, "else": kw_else, "while": kw_while, "do": kw_do,
        "for": kw_for, "switch": kw_switch, "case": kw_case,
        "default": kw_default, "return": kw_return, "break": kw_jump,
        "continue": kw_jump, "throw": kw_throw, "try": kw_try,
        "catch": kw_try, "finally": kw_try, "class": kw_class,
        "interface": kw_class, "enum": kw_class, "struct": kw_class,
        "union": kw_class, "import": kw_skip_to_semicolon,
        "package": kw_skip_to_semicolon, "using": kw_skip_to_semicolon,
        "typedef": kw_skip_to_semicolon, "namespace": kw_namespace,
        "template": kw_template, "synchronized": kw_synchronized,
    }

    # expressions
    def expr(self, parent, stops):
        e = self.add("expr", parent)
        self.depth += 1
        try:
            self.expr_items(e, stops)
        finally:
            self.depth -= 1
        return e

    def expr_items(self, e, stops, single_group=False):
        depth = 0
        prev = None
        while not self.eof():
            k, t = self.peek()
            if k == "op":
                if t in (";", "}"):
                    return
                if depth == 0 and t in stops:
                    return
                if t == "(":
                    self.add("operator", e)
                    depth += 1
                elif t == ")":
                    if depth == 0 and ")" in stops:
                        return
                    self.add("operator", e)
                    if depth > 0:
                        depth -= 1
                        if depth == 0 and single_group:
                            self.advance()
                            return
                elif t == "[":
                    ix = self.add("index", e)
                    self.advance()
                    if not self.op("]"):
                        self.expr(ix, {"]"})
                    if self.op("]"):
                        self.advance()
                    prev = "]"
                    continue
                elif t == "{":
                    if prev == "->" or prev == "anon":
                        self.block(e)
                    else:
                        self.init_block(e)
                    prev = "}"
                    continue
                elif t == "?" and depth == 0 and self.depth <= _MAX_DEPTH:
                    self.ternary(e, stops)
                    return
                elif t == "@":
                    self.skip_annotation()
                    continue
                else:
                    self.add("operator", e)
                self.advance()
                prev = t
                continue
            if k in ("num", "str", "chr", "lit"):
                self.add("literal", e)
                self.advance()
                prev = "lit"
                continue
            if k == "kw":
                if t in STMT_KW and t not in ("class",):
                    return
                if t == "new":
                    self.add("operator", e)
                    self.advance()
                    prev = self.name_or_call(e, after_new=True)
                    continue
                if t in NAME_KW:
                    prev = self.name_or_call(e)
                    continue
                self.add("operator", e)
                self.advance()
                prev = t
                continue
            if k == "id":
                prev = self.name_or_call(e)
                continue
            self.advance()

    def name_or_call(self, e, after_new=False):
        """Name, qualified name or call at the cursor; returns a marker for ``{`` handling."""
        start = self.pos
        seps = (".", "::") if self.lang == "java" else (".", "::", "->")
        p = start + 1
        while self.tok(p)[0] == "op" and self.tok(p)[1] in seps and \
                (self.tok(p + 1)[0] == "id" or (self.tok(p + 1)[0] == "kw" and self.tok(p + 1)[1] in NAME_KW)):
            p += 2
        generic_end = None
        if after_new and self.tok(p) == ("op", "<"):
            generic_end = self.scan_angle(p)
        after = generic_end if generic_end is not None else p
        is_call = self.tok(after) == ("op", "(") and self.depth <= _MAX_DEPTH
        holder = self.add("call", e) if is_call else e
        compound = p - start > 1 or generic_end is not None or (
            not is_call and self.tok(after) == ("op", "["))
        if not compound:
            self.add("name", holder)
            self.advance()
        else:
            nm = self.add("name", holder)
            while self.pos < p:
                k, _ = self.peek()
                self.add("name" if k in ("id", "kw") else "operator", nm)
                self.advance()
            if generic_end is not None:
                self.generic_args(nm)
            if not is_call:
                while self.op("["):
                    ix = self.add("index", nm)
                    self.advance()
                    if not self.op("]"):
                        self.expr(ix, {"]"})
                    if self.op("]"):
                        self.advance()
        if is_call:
            self.argument_list(holder)
            return "anon" if after_new else "call"
        return "name"

    def argument_list(self, parent):
        al = self.add("argument_list", parent)
        self.advance()
        if self.op(")"):
            self.advance()
            return
        while not self.eof():
            a = self.add("argument", al)
            before = self.pos
            self.expr(a, {",", ")"})
            if self.op(","):
                self.advance()
                continue
            if self.op(")"):
                self.advance()
                return
            if self.pos == before:
                return
            return

    def init_block(self, parent):
        b = self.add("block", parent)
        self.advance()
        while not self.eof():
            if self.op("}"):
                self.advance()
                return
            before = self.pos
            if self.op("{"):
                self.init_block(b)
            else:
                self.expr(b, {",", "}"})
            if self.op(","):
                self.advance()
            elif self.op(";"):
                return
            elif self.pos == before:
                self.advance()

    def ternary(self, e, stops):
        tree = self.tree
        items = tree.children[e]
        tree.children[e] = []
        tn = self.add("ternary", e)
        cond = self.add("condition", tn)
        ce = self.add("expr", cond)
        tree.children[ce] = items
        self.advance()
        th = self.add("then", tn)
        self.expr(th, set(stops) | {":"})
        if self.op(":"):
            self.advance()
        el = self.add("else", tn)
        self.expr(el, stops)


def parse_code(text, language="java"):
    """Token tree for a Java or C-family source string."""
    if language not in ("java", "cpp"):
        raise UnsupportedLanguage(f"no tree parser for {language!r}")
    tree = TokenTree()
    _Parser(tokenize(text, language), tree, language).parse_unit()
    return tree


def build_token_tree(fragment):
    if not isinstance(fragment, CodeFragment):
        raise TypeError("expected a CodeFragment")
    return parse_code(fragment.text, fragment.language)
