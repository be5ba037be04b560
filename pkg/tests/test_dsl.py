"""Design-language round trips, diagnostics, and export."""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bitfrag import ParseError, emit, emit_dot, parse
from bitfrag.dfg import (
    CarryRef,
    Concat,
    Const,
    DataFlowGraph,
    InputPort,
    InputRef,
    Operand,
    Operation,
    OpKind,
    ResultRef,
)
from conftest import (
    MIXED_SOURCE,
    SAT_SOURCE,
    load_design,
    random_add_design,
    random_full_design,
)


@pytest.mark.parametrize("name", ["sec2", "fig3", "elliptic", "diffeq"])
def test_bundled_designs_round_trip(name):
    g = load_design(name)
    assert parse(emit(g)) == g


@pytest.mark.parametrize("source", [SAT_SOURCE, MIXED_SOURCE])
def test_inline_fixtures_round_trip(source):
    g = parse(source)
    assert parse(emit(g)) == g


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_generated_designs_round_trip(seed):
    for g in (random_add_design(seed), random_full_design(seed)):
        assert parse(emit(g)) == g


def test_separators_are_interchangeable():
    base = "design d;\ninput A : u4;\ninput B : u4;\nX: add u4 = A {} B;\noutput X;\n"
    graphs = [parse(base.format(sep)) for sep in ["+", "-", "*", "<", ","]]
    assert all(g == graphs[0] for g in graphs)


def test_emit_writes_conventional_separators():
    text = emit(parse("design d;\ninput A : u4;\nX: add u4 = A, A;\noutput X;"))
    assert "X: add u4 = A + A;" in text
    text = emit(parse("design d;\ninput A : u4;\nY: max u4 = A + A;\noutput Y;"))
    assert "Y: max u4 = A, A;" in text


def test_mult_type_selects_core_or_signed():
    g = parse(
        "design d;\ninput A : u4;\nU: mult u8 = A * A;\nS: mult s8 = A * A;\n"
        "output U; output S;"
    )
    assert g.op("U").kind is OpKind.MULT_CORE and not g.op("U").signed
    assert g.op("S").kind is OpKind.MULT and g.op("S").signed
    # Both print back as the one surface word.
    text = emit(g)
    assert "U: mult u8" in text and "S: mult s8" in text


def test_terms_slices_consts_concat_carry():
    g = parse(
        """
        # leading comment
        design terms;
        input A : u4;  # trailing comment
        input B : u2;
        X: add u4 carry(1) = A[2:1] + const(101);
        Y: add u6 carry(X) = {A, B} + const(000001);
        Z: select u2 = X[0:0], B, A[1:0];
        output Y; output Z;
        """
    )
    x = g.op("X")
    assert x.operands[0] == Operand(InputRef("A"), 2, 1)
    assert x.operands[1] == Operand(Const("101"), 2, 0)
    assert x.carry_in == 1
    y = g.op("Y")
    assert y.carry_in == CarryRef("X")
    cat = y.operands[0].source
    assert isinstance(cat, Concat)
    # Concat braces list parts MSB first.
    assert cat.parts == (Operand(InputRef("A"), 3, 0), Operand(InputRef("B"), 1, 0))
    assert parse(emit(g)) == g


def test_emit_omits_full_width_slices():
    text = emit(
        parse("design d;\ninput A : u4;\nX: add u4 = A[3:0] + A[2:0];\noutput X;")
    )
    assert "A + A[2:0]" in text


@pytest.mark.parametrize(
    "source, message, line",
    [
        ("design d\ninput A : u4;", "expected ';'", 2),
        ("design d;\ninput A : q4;\nX: add u4 = A + A;\noutput X;", "expected a type", 2),
        ("design d;\ninput A : u4;\nX: frob u4 = A + A;\noutput X;", "unknown operation kind", 3),
        ("design d;\ninput A : u4;\nX: add u4 = A + @;\noutput X;", "unexpected character", 3),
        ("design d;\ninput A : u4;\nX: add u4 = A + ghost;\noutput X;", "undefined reference", 3),
        ("design d;\ninput A : u4;\nX: add u4 = A[5:0] + A;\noutput X;", "out of range", 3),
        ("design d;\ninput A : u4;\n62: add u4 = A + A;\noutput X;", "expected declaration", 3),
    ],
)
def test_parse_errors_carry_spans(source, message, line):
    with pytest.raises(ParseError) as err:
        parse(source)
    diag = err.value.diagnostics[0]
    assert message in diag.message
    assert diag.span is not None and diag.span.line == line


def test_emit_refuses_carry_operand():
    a = Operation(
        "A", OpKind.ADD, 2, False,
        (Operand(InputRef("x"), 1, 0), Operand(InputRef("x"), 1, 0)),
    )
    b = Operation(
        "B", OpKind.ADD, 2, False,
        (Operand(CarryRef("A"), 0, 0), Operand(InputRef("x"), 1, 0)),
    )
    g = DataFlowGraph("d", (InputPort("x", 2, False),), (a, b), ("B",))
    with pytest.raises(ValueError, match="no DSL syntax"):
        emit(g)


def test_emit_refuses_sliced_and_nested_concat():
    part = Operand(InputRef("x"), 1, 0)
    sliced = Operand(Concat((part, part)), 2, 1)
    nested = Operand(Concat((Operand(Concat((part, part)), 3, 0), part)), 5, 0)
    base = Operand(InputRef("x"), 1, 0)
    for bad in (sliced, nested):
        op = Operation("A", OpKind.ADD, 4, False, (bad, base))
        g = DataFlowGraph("d", (InputPort("x", 2, False),), (op,), ("A",))
        with pytest.raises(ValueError, match="concat"):
            emit(g)


def test_dot_export_nodes_and_edges(sec2):
    dot = emit_dot(sec2)
    assert 'digraph "sec2"' in dot
    assert '"C" [shape=box, label="C\\nadd 16"];' in dot
    assert '"C" -> "E" [label="[15:0]"];' in dot


def test_dot_export_marks_carry_edges():
    g = parse(
        "design d;\ninput A : u4;\nX: add u4 = A + A;\n"
        "Y: add u4 carry(X) = A + A;\noutput Y;"
    )
    assert '"X" -> "Y" [label="carry", style=dashed];' in emit_dot(g)
