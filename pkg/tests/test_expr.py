import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from junctio.expr import (
    Expr,
    ExprEvalError,
    ExprSyntaxError,
    parse_expr,
    scalar_fn,
)


def test_identity_control():
    assert parse_expr("a").evaluate(0.0, 7.5) == 7.5


def test_direct_arithmetic():
    assert parse_expr("2 + abs(x) * a").evaluate(-3.0, 2.0) == 8


def test_division_by_zero():
    e = parse_expr("min(x, a) / 0")
    with pytest.raises(ExprEvalError):
        e.evaluate(1.0, 2.0)


def test_functions():
    assert parse_expr("max(x, a)").evaluate(1.0, 2.0) == 2.0
    assert parse_expr("exp(x)").evaluate(0.0, 0.0) == 1.0
    assert parse_expr("min(1, 2)").evaluate(0, 0) == 1.0


def test_precedence_and_unary():
    assert parse_expr("-x + 2 * a").evaluate(1.0, 3.0) == 5.0
    assert parse_expr("2 - 3 - 4").evaluate(0, 0) == -5.0
    assert parse_expr("12 / 3 / 2").evaluate(0, 0) == 2.0
    assert parse_expr("-(x + a)").evaluate(1.0, 2.0) == -3.0


def test_scientific_notation():
    assert parse_expr("1e-3 + 2E2").evaluate(0, 0) == pytest.approx(200.001)


def test_array_broadcast():
    xs = np.linspace(-1, 1, 5)
    out = parse_expr("abs(x) * a").evaluate(xs, 2.0)
    assert np.allclose(out, 2 * np.abs(xs))


@pytest.mark.parametrize(
    "source,offset",
    [("", 0), ("  ", 0), ("1 +", 3), ("foo(1)", 0), ("min(1)", 0), ("1 @ 2", 2), ("(1", 2)],
)
def test_syntax_errors_carry_offset(source, offset):
    with pytest.raises(ExprSyntaxError) as err:
        parse_expr(source)
    assert err.value.offset == offset


def test_unknown_identifier():
    with pytest.raises(ExprSyntaxError):
        parse_expr("x + y")


def test_scalar_fn_matches_tree():
    e = parse_expr("min(x, a) + exp(-x) * 2 - abs(a)")
    f = scalar_fn(e)
    for x, a in [(-1.5, 2.0), (0.0, 0.0), (3.0, -1.0)]:
        assert f(x, a) == pytest.approx(float(e.evaluate(x, a)))


def test_scalar_fn_division_by_zero():
    f = scalar_fn(parse_expr("1 / x"))
    with pytest.raises(ExprEvalError):
        f(0.0, 0.0)


# ---------------------------------------------------------------------------
# Round-trip property: print then parse yields an equal tree.

_leaf = st.one_of(
    st.builds(Expr, st.just("num"), st.floats(0, 100, allow_nan=False).map(float)),
    st.sampled_from([Expr("var", "x"), Expr("var", "a")]),
)


def _node(children):
    return st.one_of(
        st.builds(
            lambda op, l, r: Expr("binop", op, (l, r)),
            st.sampled_from(["+", "-", "*", "/"]),
            children,
            children,
        ),
        st.builds(lambda c: Expr("neg", None, (c,)), children),
        st.builds(lambda c: Expr("call", "abs", (c,)), children),
        st.builds(lambda c: Expr("call", "exp", (c,)), children),
        st.builds(lambda l, r: Expr("call", "min", (l, r)), children, children),
        st.builds(lambda l, r: Expr("call", "max", (l, r)), children, children),
    )


exprs = st.recursive(_leaf, _node, max_leaves=12)


@given(exprs)
def test_round_trip(tree):
    assert parse_expr(tree.to_source()) == tree


@given(exprs, st.floats(-5, 5), st.floats(-2, 2))
def test_evaluation_finite_or_reported(tree, x, a):
    try:
        value = tree.evaluate(x, a)
    except ExprEvalError:
        return
    value = float(value)
    if math.isfinite(value):
        assert parse_expr(tree.to_source()).evaluate(x, a) == value
