"""Hypothesis strategies and seeded generators shared by the test modules."""

import random
from fractions import Fraction

from hypothesis import strategies as st

from segreweb import expr as E
from segreweb.exterior import ExprForm

coeffs = st.fractions(min_value=-5, max_value=5, max_denominator=6)


@st.composite
def monomial_terms(draw, names, max_degree=4, max_terms=5):
    n = draw(st.integers(1, max_terms))
    terms = []
    for _ in range(n):
        c = draw(coeffs)
        deg = draw(st.integers(0, max_degree))
        picked = [draw(st.sampled_from(names)) for _ in range(deg)]
        t = E.Const(c)
        for v in picked:
            t = E.mul(t, E.Var(v))
        terms.append(t)
    return E.sum_exprs(terms)


def polynomials(names, max_degree=4, max_terms=5):
    return monomial_terms(tuple(names), max_degree, max_terms)


@st.composite
def forms(draw, basis, degree, names=None, max_degree=3):
    names = names or basis
    n = len(basis)
    from itertools import combinations

    keys = list(combinations(range(n), degree))
    chosen = draw(st.lists(st.sampled_from(keys), min_size=0, max_size=3, unique=True)) if keys else []
    return ExprForm(basis, degree, {k: draw(polynomials(names, max_degree, 3)) for k in chosen})


def random_poly(rng: random.Random, names, degree=3, terms=6, scale=3):
    out = []
    for _ in range(terms):
        c = E.Const(Fraction(rng.randint(-scale, scale), rng.randint(1, 3)))
        m = c
        for _ in range(rng.randint(0, degree)):
            m = E.mul(m, E.Var(rng.choice(names)))
        out.append(m)
    return E.sum_exprs(out)


def web_corpus(n=24, seed=2024):
    """Seeded m = 2 polynomial webs of degree <= 3.

    Three families in rotation: generic cubic perturbations of x + y (torsion
    expected), separable webs f(x) + g(y), and products of planar webs.  The
    last two are torsion-free, so both sides of the torsion test are covered.
    """
    from segreweb.web import WebSpec

    rng = random.Random(seed)
    X, Y = ("x1", "x2"), ("y1", "y2")
    out = []
    for k in range(n):
        fam = k % 3
        if fam == 0:
            w = [E.add(E.add(E.Var(f"x{i}"), E.Var(f"y{i}")), _small(rng, X + Y, 3)) for i in (1, 2)]
        elif fam == 1:
            w = [
                E.sum_exprs([E.Var(f"x{i}"), E.Var(f"y{i}"), _small(rng, X, 3), _small(rng, Y, 3)])
                for i in (1, 2)
            ]
        else:
            w = [
                E.sum_exprs([E.Var("x1"), E.Var("y1"), _small(rng, ("x1", "y1"), 3)]),
                E.sum_exprs([E.Var("x2"), E.Var("y2"), _small(rng, ("x2", "y2"), 3)]),
            ]
        out.append(WebSpec(2, tuple(w)))
    return out


def _small(rng, names, degree):
    out = []
    for _ in range(3):
        c = E.Const(Fraction(rng.randint(-3, 3), rng.randint(2, 6)))
        m = c
        for _ in range(rng.randint(2, degree)):
            m = E.mul(m, E.Var(rng.choice(names)))
        out.append(m)
    return E.sum_exprs(out)
