from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bicdetect.errors import MalformedDiff, MalformedXml, UnknownElement, UnsupportedLanguage
from bicdetect.syntax import (
    VOCABULARY,
    CodeFragment,
    TokenTree,
    build_token_tree,
    emit_xml,
    extract_fragments,
    ingest_srcml,
    parse_code,
    token_sequence,
)
from bicdetect.syntax.tree import BRACKET_KINDS, KEYWORD_KINDS

FIG2_JAVA = "if (x <= y) { y = 0; } else { y = 1; }"
FIG2_XML = """<?xml version="1.0" encoding="UTF-8" standalone="yes"?>
<unit xmlns="http://www.srcML.org/srcML/src" revision="1.0.0" language="Java" filename="test.java">\
<if_stmt><if>if <condition>(<expr><name>x</name> <operator>&lt;=</operator> <name>y</name></expr>)</condition> \
<block>{<block_content> <expr_stmt><expr><name>y</name> <operator>=</operator> <literal type="number">0</literal>\
</expr>;</expr_stmt> </block_content>}</block></if> <else>else <block>{<block_content> <expr_stmt><expr>\
<name>y</name> <operator>=</operator> <literal type="number">1</literal></expr>;</expr_stmt> </block_content>}\
</block></else></if_stmt>
</unit>"""


def _diff(files):
    out = []
    for path, hunks in files:
        out += [f"diff --git a/{path} b/{path}", f"--- a/{path}", f"+++ b/{path}"]
        for start, lines in hunks:
            adds = [ln for ln in lines if ln.startswith("+")]
            ctx = [ln for ln in lines if ln.startswith(" ")]
            dels = [ln for ln in lines if ln.startswith("-")]
            out.append(f"@@ -{start},{len(ctx) + len(dels)} +{start},{len(ctx) + len(adds)} @@")
            out += lines
    return "\n".join(out) + "\n"


# -- diffs -------------------------------------------------------------------

def test_single_added_line():
    frags = extract_fragments(_diff([("src/Foo.java", [(1, ["+int x = 0;"])])]))
    assert len(frags) == 1
    assert frags[0].language == "java" and frags[0].text == "int x = 0;"


def test_non_source_files_skipped():
    assert extract_fragments(_diff([("README.md", [(1, ["+hello"])])])) == []


def test_three_hunks_in_order():
    d = _diff([("a/A.java", [(1, ["+a1();"]), (20, [" ctx", "+a2();"])]), ("B.cpp", [(3, ["-old();", "+b1();"])])])
    frags = extract_fragments(d, commit_id="c1")
    assert [f.text for f in frags] == ["a1();", "a2();", "b1();"]
    assert [f.origin[1:] for f in frags] == [("a/A.java", 0), ("a/A.java", 1), ("B.cpp", 0)]
    assert all(f.origin[0] == "c1" for f in frags)


def test_context_mode_keeps_context():
    d = _diff([("A.java", [(1, [" int a;", "+int b;", "-int c;"])])])
    assert extract_fragments(d, "added_plus_context")[0].text == "int a;\nint b;"
    assert extract_fragments(d, "added_only")[0].text == "int b;"


def test_malformed_hunk():
    with pytest.raises(MalformedDiff):
        extract_fragments("--- a/A.java\n+++ b/A.java\n@@ nonsense @@\n+x\n")


def test_empty_patch():
    assert extract_fragments("") == []


# -- parser ------------------------------------------------------------------

def _kinds_under(tree, node):
    out, stack = [], list(tree.children[node])
    while stack:
        n = stack.pop()
        out.append(tree.kinds[n])
        stack.extend(tree.children[n])
    return out


def test_fig2_structure():
    tree = parse_code(FIG2_JAVA)
    assert tree.kinds[0] == "unit"
    (stmt,) = tree.children[0]
    assert tree.kinds[stmt] == "if_stmt"
    below = set(_kinds_under(tree, stmt))
    assert {"if", "condition", "expr", "name", "block", "else"} <= below
    assert emit_xml(tree).startswith("<unit><if_stmt><if><condition><expr><name />")


def test_empty_fragment_is_root_only():
    tree = build_token_tree(CodeFragment("java", ""))
    assert len(tree) == 1 and tree.kinds[0] == "unit"


def test_operand_order():
    a, b = parse_code("i = i + 1;"), parse_code("i = 1 + i;")
    assert a.kind_counts() == b.kind_counts()
    assert token_sequence(a) != token_sequence(b)


def test_python_rejected():
    with pytest.raises(UnsupportedLanguage):
        build_token_tree(CodeFragment("python", "x = 1"))


def test_named_constructs():
    tree = parse_code("if (a && b || c) { if (d) { e(); } } switch (k) { case 1: x = 2; break; default: y(); }")
    kinds = Counter(tree.kinds)
    assert kinds["if_stmt"] == 2 and kinds["switch"] == 1 and kinds["case"] == 1
    assert kinds["operator"] >= 3


def test_comments_and_whitespace_ignored():
    base = parse_code("int x = a + 1;\nif (x > 2) { f(x); }")
    noisy = parse_code("int   x=a+1; // note\n/* block\n comment */ if(x>2){\n\n f( x ) ;}")
    assert base == noisy


@settings(max_examples=200, deadline=None)
@given(st.text(alphabet="abxy01 (){};=+-<>!&|,.[]\"'\n/*#:?", max_size=80))
def test_parse_is_total(text):
    for lang in ("java", "cpp"):
        tree = parse_code(text, lang)
        assert tree.validate()
        assert set(tree.kinds) <= VOCABULARY
        assert parse_code(text, lang) == tree


# -- srcML -------------------------------------------------------------------

def test_fig2_xml_matches_parser():
    assert ingest_srcml(FIG2_XML) == parse_code(FIG2_JAVA)


def test_unit_only():
    tree = ingest_srcml("<unit/>")
    assert len(tree) == 1


def test_strict_unknown_element():
    with pytest.raises(UnknownElement):
        ingest_srcml("<unit><foo/></unit>", strict=True)
    assert len(ingest_srcml("<unit><foo><name/></foo></unit>")) == 2


def test_malformed_xml():
    with pytest.raises(MalformedXml):
        ingest_srcml("<unit><if>")


PROGRAMS = [
    FIG2_JAVA,
    "for (int i = 0; i < n; i++) { total += f(i, 2); }",
    "while (x) { if (y) { return z; } }",
    "do { i++; } while (i < 3);",
    "int f(int a, String b) { return a; }",
    "switch (k) { case 1: x = 2; break; default: y(); }",
]


@pytest.mark.parametrize("src", PROGRAMS)
def test_xml_round_trip(src):
    tree = parse_code(src)
    assert ingest_srcml(emit_xml(tree), strict=True) == tree


# -- token sequences ---------------------------------------------------------

def test_fig2_sequence_prefix():
    seq = token_sequence(parse_code(FIG2_JAVA))
    assert seq[:5] == ["if", "condition-open", "name", "operator", "name"]


def test_empty_sequences():
    assert token_sequence(TokenTree()) == []
    assert token_sequence(CodeFragment("unknown", "whatever")) == []


def test_python_flat_lexer():
    seq = token_sequence(CodeFragment("python", "x = y + 1  # c"))
    assert seq == ["name", "operator", "name", "operator", "literal"]


def _random_tree(draw):
    tree = TokenTree()
    kinds = sorted(VOCABULARY - {"unit"})
    n = draw(st.integers(0, 40))
    for _ in range(n):
        parent = draw(st.integers(0, len(tree) - 1))
        tree.add(draw(st.sampled_from(kinds)), parent)
    return tree


@settings(max_examples=100, deadline=None)
@given(st.data())
def test_sequence_length_oracle(data):
    """Leaves contribute one token each; inner keyword nodes one, bracketed inner nodes two."""
    tree = _random_tree(data.draw)
    par = tree.parents()
    leaves = keywords = brackets = 0
    for n in range(1, len(tree)):
        kind = tree.kinds[n]
        if not tree.children[n]:
            leaves += 1
        elif kind in BRACKET_KINDS and not (kind == "condition" and tree.kinds[par[n]] == "control"):
            brackets += 1
        elif kind in KEYWORD_KINDS:
            keywords += 1
    seq = token_sequence(tree)
    assert len(seq) == leaves + keywords + 2 * brackets
    assert sum(1 for t in seq if not t.endswith(("-open", "-close"))) - keywords == leaves
