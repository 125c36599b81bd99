import pytest
from hypothesis import given, strategies as st

from semo.script import (DistanceTest, NamedEval, Script, ScriptError,
                         Statement, format_script, parse_script)
from tests.conftest import LISTING_GRASP


def test_parse_two_statement_snippet():
    ast = parse_script("ball_detection\nlook_at targeting ball whenever seen, priority of 2")
    assert len(ast.statements) == 2
    assert ast.statements[0] == Statement("ball_detection")
    second = ast.statements[1]
    assert second.head == "look_at"
    assert second.target == "ball"
    assert second.evaluation == NamedEval("seen")
    assert second.priority == 2


def test_parse_empty_source():
    ast = parse_script("")
    assert ast.statements == [] and ast.nodes == {}


def test_parse_two_branch_nodes():
    src = (
        "node A:\n"
        "    waving\n"
        "node B:\n"
        "    arm_freeze\n"
        "A whenever d > 5.1\n"
        "B whenever d < 2.7\n"
    )
    ast = parse_script(src)
    assert set(ast.nodes) == {"A", "B"}
    assert ast.statements[0].evaluation == DistanceTest(lower=5.1)
    assert ast.statements[1].evaluation == DistanceTest(upper=2.7)


def test_parse_interval_evaluation():
    ast = parse_script("waving whenever 2.7 < d < 5.1")
    assert ast.statements[0].evaluation == DistanceTest(2.7, 5.1)


def test_parse_clauses_any_order_with_optional_commas():
    a = parse_script("look_at whenever seen targeting ball, priority of 2").statements[0]
    b = parse_script("look_at, priority of 2, targeting ball, whenever seen").statements[0]
    assert a == b


def test_parse_comments_and_blank_lines():
    ast = parse_script("# header\n\nwaving  # trailing\n   \n")
    assert [s.head for s in ast.statements] == ["waving"]


def test_statement_carries_location():
    ast = parse_script("# c\nwaving\nlook_at targeting ball")
    assert ast.statements[0].line == 2
    assert ast.statements[1].line == 3


def test_parse_grasping_listing():
    ast = parse_script(LISTING_GRASP)
    assert [s.head for s in ast.statements] == [
        "ball_detection", "head_search", "look_at", "grasp"]
    assert [s.priority for s in ast.statements] == [0, 1, 2, 3]


@pytest.mark.parametrize("src,fragment", [
    ("look_at targeting", "expected"),
    ("node A:\nwaving", "empty body"),
    ("node A:\n    waving\nnode A:\n    waving", "duplicate node"),
    ("waving, priority of x", "priority"),
    ("waving, priority of 2.5", "priority"),
    ("waving whenever 5.1 < d < 2.7", "increase"),
    ("\twaving", "tabs"),
    ("node A:\n    waving\n   look_at targeting ball", "indentation"),
    ("waving targeting a targeting b", "duplicate 'targeting'"),
    ("whenever seen", "cannot start"),
    ("look_at targeting ball whenever d >", "unexpected end"),
    ("waving ?", "unexpected character"),
])
def test_parse_errors(src, fragment):
    with pytest.raises(ScriptError) as err:
        parse_script(src)
    assert fragment in str(err.value)


def test_error_location_points_at_offence():
    with pytest.raises(ScriptError) as err:
        parse_script("waving\nlook_at targeting node")
    assert err.value.line == 2


def test_indented_line_outside_node_rejected():
    with pytest.raises(ScriptError):
        parse_script("waving\n    look_at targeting ball")


def test_format_listing_roundtrip():
    ast = parse_script(LISTING_GRASP)
    assert parse_script(format_script(ast)) == ast


def test_format_empty_ast():
    assert format_script(Script()) == ""


def test_priority_zero_not_printed_and_roundtrips():
    ast = parse_script("waving, priority of 0")
    text = format_script(ast)
    assert "priority" not in text
    assert parse_script(text).statements[0].priority == 0


def test_format_is_fixed_point():
    src = "node A:\n    waving\nA whenever d > 5.1\n"
    once = format_script(parse_script(src))
    assert format_script(parse_script(once)) == once


_NAMES = st.from_regex(r"[a-z][a-z0-9_]{0,8}", fullmatch=True).filter(
    lambda s: s not in {"node", "targeting", "whenever", "priority", "of", "d"})
_EVALS = st.one_of(
    st.none(),
    st.builds(NamedEval, _NAMES),
    st.builds(lambda lo: DistanceTest(lower=lo),
              st.floats(0.01, 99, allow_nan=False).map(lambda x: round(x, 3))),
    st.builds(lambda hi: DistanceTest(upper=hi),
              st.floats(0.01, 99, allow_nan=False).map(lambda x: round(x, 3))),
    st.builds(lambda lo, w: DistanceTest(round(lo, 3), round(lo + w, 3)),
              st.floats(0.01, 50, allow_nan=False),
              st.floats(0.5, 50, allow_nan=False)),
)
_STATEMENTS = st.builds(
    Statement,
    head=_NAMES,
    target=st.one_of(st.none(), _NAMES),
    evaluation=_EVALS,
    priority=st.integers(0, 9),
)


@st.composite
def _scripts(draw):
    script = Script(statements=draw(st.lists(_STATEMENTS, max_size=6)))
    for name in draw(st.lists(st.from_regex(r"[A-Z][a-zA-Z0-9]{0,5}", fullmatch=True),
                              unique=True, max_size=3)):
        script.nodes[name] = draw(st.lists(_STATEMENTS, min_size=1, max_size=4))
    return script


@given(_scripts())
def test_roundtrip_property(script):
    assert parse_script(format_script(script)) == script
