from fractions import Fraction

import pytest
from hypothesis import given

from segreweb import expr as E
from segreweb.poly import Poly, monomials, to_poly, try_poly
from segreweb.sampling import is_identically_zero
from strategies import polynomials

V = ("x1", "x2", "y1", "y2")


def test_canonical_expansion():
    a = to_poly(E.parse("(x1 + y1)^2 - x1^2 - 2*x1*y1", V), V)
    assert a == to_poly(E.parse("y1^2", V), V)


def test_degrees():
    q = to_poly(E.parse("x1^2*y2 + 3*y1 + 1", V), V)
    assert q.degree() == 3
    assert q.lowest_degree() == 0
    assert q.degree_in(["y1", "y2"]) == 1
    assert q.homogeneous(3) == to_poly(E.parse("x1^2*y2", V), V)
    assert q.truncate(1) == to_poly(E.parse("3*y1 + 1", V), V)


def test_rational_function_is_not_polynomial():
    assert try_poly(E.parse("1/(x1 + 1)", V), V) is None
    with pytest.raises(E.NotPolynomialError):
        to_poly(E.parse("sin(x1)", V), V)


def test_division_by_constant_is_polynomial():
    assert to_poly(E.parse("x1^3/6", V), V).terms == {(3, 0, 0, 0): Fraction(1, 6)}


def test_monomial_count():
    # C(n + d - 1, d)
    assert len(monomials(4, 6)) == 84
    assert len(monomials(4, 8)) == 165


@given(polynomials(V), polynomials(V))
def test_ring_homomorphism(a, b):
    pa, pb = to_poly(a, V), to_poly(b, V)
    assert to_poly(E.mul(a, b), V) == pa * pb
    assert to_poly(E.sub(a, b), V) == pa - pb


@given(polynomials(V))
def test_diff_commutes_with_conversion(a):
    for v in V:
        assert to_poly(E.differentiate(a, v), V) == to_poly(a, V).diff(v)


@given(polynomials(V))
def test_string_round_trip(a):
    q = to_poly(a, V)
    assert to_poly(E.parse(q.to_string(), V), V) == q


def test_zero_test_rational_function():
    e = E.parse("x1/(1 + y1^2) - x1*(1 + y1^2)/(1 + y1^2)^2", V)
    assert is_identically_zero(e)
    assert not is_identically_zero(E.parse("x1/(1 + y1^2)", V))


def test_poly_evaluate_matches_expr():
    e = E.parse("x1^2*y2 - 3/4*y1 + 2", V)
    pt = {"x1": Fraction(1, 3), "x2": 5, "y1": Fraction(-2), "y2": Fraction(7, 5)}
    assert to_poly(e, V).evaluate(pt) == E.evaluate(e, pt)


def test_poly_variables_must_match():
    with pytest.raises(ValueError):
        Poly(("x1",), {}) + Poly(("x2",), {})
