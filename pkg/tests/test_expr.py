import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stochsym.expr import (
    Const, Domain, ParseError, UndecidableError, UndefinedError, DimensionError, differentiate, evaluate,
    evaluate_points, is_zero, lambdify, parse, simplify, substitute, to_text, zero_test,
)
from stochsym.model import Sde

from helpers import P, PUNCTURED, UNIT


# -- parsing and printing ----------------------------------------------------


@pytest.mark.parametrize("text, point, value", [
    ("x/(x^2+y^2)", (1, 1), 0.5),
    ("sqrt(x^2+y^2)", (3, 4), 5.0),
    ("neg(x)*y", (2, 3), -6.0),
    ("-x + y", (2, 3), 1.0),
    ("x^-1", (4, 0), 0.25),
    ("x^(1/3)", (-8, 0), -2.0),
    ("exp(log(x))", (2.5, 0), 2.5),
    ("sin(x)^2 + cos(x)^2", (0.7, 0), 1.0),
    ("1.5e1 * x", (2, 0), 30.0),
])
def test_evaluate_known_values(text, point, value):
    assert evaluate(P(text), point) == pytest.approx(value, rel=1e-14)


def test_indexed_variables_for_larger_dimension():
    e = parse("x1 + 2*x4", 4)
    assert evaluate(e, (1, 0, 0, 3)) == 7.0
    assert to_text(e, 4) == "x1 + 2*x4"


@pytest.mark.parametrize("text, pos", [
    ("x +", 3),
    ("(x", 2),
    ("foo(x)", 0),
    ("x3", 0),
    ("x y", 2),
    ("2 ^ x", 4),
    ("2^3^2", 3),
])
def test_parse_errors_report_position(text, pos):
    with pytest.raises(ParseError) as info:
        parse(text, 2)
    assert info.value.position == pos


def test_aliases_beyond_dimension_rejected():
    with pytest.raises(ParseError):
        parse("z", 2)


def test_undefined_point_raises():
    with pytest.raises(UndefinedError):
        evaluate(P("1/x"), (0, 1))
    with pytest.raises(UndefinedError):
        evaluate(P("sqrt(x)"), (-1, 0))
    with pytest.raises(UndefinedError):
        evaluate(P("log(x)"), (0, 0))


def test_evaluate_points_marks_undefined_with_nan():
    vals = evaluate_points(P("1/x"), np.array([[1.0, 0], [0.0, 0]]))
    assert vals[0] == 1.0 and np.isnan(vals[1])


# random expression trees for round-trip and derivative properties

_leaf = st.one_of(
    st.sampled_from(["x", "y", "1", "2", "(1/3)", "0.5"]),
)


def _node(children):
    unary = st.tuples(st.sampled_from(["sin", "cos", "exp", "neg"]), children).map(lambda t: f"{t[0]}({t[1]})")
    binary = st.tuples(children, st.sampled_from(["+", "-", "*"]), children).map(lambda t: f"({t[0]} {t[1]} {t[2]})")
    quot = st.tuples(children, children).map(lambda t: f"({t[0]})/(2 + sin({t[1]}))")
    powers = st.tuples(children, st.sampled_from(["2", "3", "(-1)"])).map(lambda t: f"(1 + ({t[0]})^2)^{t[1]}")
    return st.one_of(unary, binary, quot, powers)


exprs = st.recursive(_leaf, _node, max_leaves=8)
points = st.tuples(st.floats(-1.5, 1.5), st.floats(-1.5, 1.5))


@settings(max_examples=150, deadline=None)
@given(exprs, points)
def test_print_parse_round_trip(text, pt):
    e = parse(text, 2)
    back = parse(to_text(e, 2), 2)
    assert evaluate(back, pt) == pytest.approx(evaluate(e, pt), rel=1e-12, abs=1e-12)


def _ridders(f, x, h=0.1, levels=10):
    # Richardson table over shrinking steps, keeps the entry with smallest error estimate
    table = [[(f(x + h) - f(x - h)) / (2 * h)]]
    best, err = table[0][0], math.inf
    for k in range(1, levels):
        h /= 1.6
        row = [(f(x + h) - f(x - h)) / (2 * h)]
        fac = 1.0
        for j in range(1, k + 1):
            fac *= 1.6 ** 2
            row.append((row[j - 1] * fac - table[k - 1][j - 1]) / (fac - 1))
            e = max(abs(row[j] - row[j - 1]), abs(row[j] - table[k - 1][j - 1]))
            if e < err:
                best, err = row[j], e
        table.append(row)
        if abs(row[k] - table[k - 1][k - 1]) > 2 * err:
            break
    return best, err


@settings(max_examples=150, deadline=None)
@given(exprs, points, st.integers(0, 1))
def test_derivative_matches_extrapolated_difference(text, pt, i):
    e = parse(text, 2)
    d = evaluate(differentiate(e, i), pt)

    def along(t):
        q = list(pt)
        q[i] = t
        return evaluate(e, q)

    fd, err = _ridders(along, pt[i])
    assert abs(d - fd) <= 10 * err + 1e-7 * (1 + abs(d))


@settings(max_examples=150, deadline=None)
@given(exprs, points)
def test_simplify_preserves_value(text, pt):
    e = parse(text, 2)
    s = simplify(e)
    assert evaluate(s, pt) == pytest.approx(evaluate(e, pt), rel=1e-10, abs=1e-10)


@settings(max_examples=60, deadline=None)
@given(exprs)
def test_lambdify_agrees_with_evaluate(text):
    e = parse(text, 2)
    pts = UNIT.sample()
    f = lambdify([e])
    assert np.allclose(f(pts)[:, 0], evaluate_points(e, pts), rtol=1e-12, atol=1e-12, equal_nan=True)


@settings(max_examples=60, deadline=None)
@given(exprs, exprs, st.fractions(-3, 3, max_denominator=5), st.fractions(-3, 3, max_denominator=5))
def test_derivative_laws_hold_under_identity_test(t1, t2, a, b):
    e1, e2 = parse(t1, 2), parse(t2, 2)
    ca, cb = Const(a), Const(b)
    d = lambda e, i: differentiate(e, i, 2)  # noqa: E731
    assert is_zero(d(ca * e1 + cb * e2, 0) - (ca * d(e1, 0) + cb * d(e2, 0)), UNIT)
    assert is_zero(d(d(e1, 0), 1) - d(d(e1, 1), 0), UNIT)
    assert is_zero(d(e1 * e2, 1) - (e1 * d(e2, 1) + e2 * d(e1, 1)), UNIT)


@pytest.mark.parametrize("text, i, expected", [
    ("x/(x^2+y^2)", 0, "(y^2 - x^2)/(x^2+y^2)^2"),
    ("x", 1, "0"),
    ("sqrt(x^2+y^2)", 0, "x/sqrt(x^2+y^2)"),
])
def test_derivative_examples(text, i, expected):
    assert is_zero(differentiate(P(text), i, 2) - P(expected), PUNCTURED)


def test_derivative_index_out_of_range():
    with pytest.raises(DimensionError):
        differentiate(P("x"), 2, 2)


def test_substitute_is_composition():
    e = P("x*y + sin(x)")
    F = [P("x + y"), P("x - y")]
    pt = (0.3, -0.8)
    expected = evaluate(e, (pt[0] + pt[1], pt[0] - pt[1]))
    assert evaluate(substitute(e, F), pt) == pytest.approx(expected)


def test_substitute_needs_every_variable():
    with pytest.raises(DimensionError):
        substitute(P("x + y"), [P("x")])


@pytest.mark.parametrize("text, expected", [
    ("x*x/x", "x"),
    ("x - x + 2*y - y", "y"),
    ("sqrt(1/(x^2+y^2))*sqrt(x^2+y^2)", "1"),
    ("x^(1/2)*x^(1/2)", "x"),
    ("2*x/4", "(1/2)*x"),
    ("-(x*y) + y*x", "0"),
])
def test_simplify_examples(text, expected):
    assert to_text(simplify(P(text)), 2) == expected


def test_simplify_keeps_absolute_value_semantics():
    # sqrt(x^2) is |x|, not x
    s = simplify(P("sqrt(x^2)"))
    assert evaluate(s, (-2, 0)) == 2.0


# -- identity test -------------------------------------------------------------


def test_is_zero_identities_and_non_identities():
    assert is_zero(P("sin(x)^2 + cos(x)^2 - 1"), UNIT)
    assert is_zero(P("(x+y)^2 - x^2 - 2*x*y - y^2"), UNIT)
    assert not is_zero(P("x"), UNIT)
    assert not is_zero(P("1e-6"), UNIT)


def test_is_zero_is_relative_to_subterm_scale():
    big = P("1e12*x")
    # residues below 1e-9 of the largest subterm are indistinguishable from zero
    assert is_zero(big - big, UNIT)
    assert is_zero(big + P("1") - big, UNIT)
    assert not is_zero(big + P("1e4") - big, UNIT)


def test_is_zero_skips_undefined_points_and_reports():
    r = zero_test(P("x/(x^2+y^2) - x/(x^2+y^2)"), PUNCTURED)
    assert r.passed and r.n_defined == 64


def test_is_zero_undecidable_when_nowhere_defined():
    with pytest.raises(UndecidableError):
        zero_test(P("log(neg(x^2) - 1)"), UNIT)


def test_sampling_is_deterministic_and_respects_exclusions():
    a = PUNCTURED.sample()
    b = Domain((-10, -10), (10, 10), (P("x^2 + y^2"),), 0.001).sample()
    assert np.array_equal(a, b)
    assert a.shape == (64, 2)
    assert np.all(np.abs((a ** 2).sum(axis=1)) >= 0.001)
    assert PUNCTURED.contains(np.array([[0.0, 0.0]])).tolist() == [False]


def test_default_margin_is_thousandth_of_diagonal():
    d = Domain((0, 0), (3, 4))
    assert d.eps == pytest.approx(5e-3)


def test_sde_rejects_wrong_dimension():
    with pytest.raises(DimensionError):
        Sde([parse("x3", 3), P("0")], [[P("1")], [P("1")]], UNIT)


def test_constants_fold_exactly():
    assert to_text(P("1/3 + 1/6"), 2) == "(1/2)"
    assert isinstance(P("2*3"), Const)
    assert math.isclose(evaluate(P("(1/3)*3"), (0, 0)), 1.0)
