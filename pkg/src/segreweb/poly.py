"""Sparse multivariate polynomials with rational coefficients.

Used as the canonical form for exact zero tests and as the working
representation of the jet solver.  Exponent tuples follow the order of
``Poly.variables``.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from . import expr as E

Monomial = tuple[int, ...]


class Poly:
    __slots__ = ("variables", "terms")

    def __init__(self, variables: Sequence[str], terms: Mapping[Monomial, Fraction] | None = None):
        self.variables = tuple(variables)
        self.terms: dict[Monomial, Fraction] = {}
        if terms:
            n = len(self.variables)
            for mono, c in terms.items():
                if len(mono) != n:
                    raise ValueError("monomial arity does not match variables")
                if c:
                    self.terms[tuple(mono)] = Fraction(c)

    # constructors
    @classmethod
    def const(cls, variables: Sequence[str], c) -> "Poly":
        return cls(variables, {(0,) * len(variables): Fraction(c)})

    @classmethod
    def var(cls, variables: Sequence[str], name: str) -> "Poly":
        mono = tuple(1 if v == name else 0 for v in variables)
        return cls(variables, {mono: Fraction(1)})

    def _new(self, terms: dict) -> "Poly":
        p = Poly(self.variables)
        p.terms = {k: v for k, v in terms.items() if v}
        return p

    def _check(self, other: "Poly") -> None:
        if other.variables != self.variables:
            raise ValueError("polynomials over different variable lists")

    def __add__(self, other: "Poly") -> "Poly":
        self._check(other)
        out = dict(self.terms)
        for k, v in other.terms.items():
            out[k] = out.get(k, 0) + v
        return self._new(out)

    def __sub__(self, other: "Poly") -> "Poly":
        self._check(other)
        out = dict(self.terms)
        for k, v in other.terms.items():
            out[k] = out.get(k, 0) - v
        return self._new(out)

    def __neg__(self) -> "Poly":
        return self._new({k: -v for k, v in self.terms.items()})

    def __mul__(self, other) -> "Poly":
        if not isinstance(other, Poly):
            c = Fraction(other)
            return self._new({k: v * c for k, v in self.terms.items()})
        self._check(other)
        out: dict[Monomial, Fraction] = {}
        for k1, v1 in self.terms.items():
            for k2, v2 in other.terms.items():
                k = tuple(a + b for a, b in zip(k1, k2))
                out[k] = out.get(k, 0) + v1 * v2
        return self._new(out)

    __rmul__ = __mul__

    def __pow__(self, n: int) -> "Poly":
        if n < 0:
            raise E.NotPolynomialError("negative power of a polynomial")
        out = Poly.const(self.variables, 1)
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Poly) and self.variables == other.variables and self.terms == other.terms

    def __hash__(self):
        return hash((self.variables, frozenset(self.terms.items())))

    def __repr__(self) -> str:
        return f"Poly({self.to_string()!r})"

    def is_zero(self) -> bool:
        return not self.terms

    def degree(self) -> int:
        """Total degree; -1 for the zero polynomial."""
        return max((sum(k) for k in self.terms), default=-1)

    def lowest_degree(self) -> int | None:
        return min((sum(k) for k in self.terms), default=None)

    def degree_in(self, names: Iterable[str]) -> int:
        idx = [self.variables.index(n) for n in names]
        return max((sum(k[i] for i in idx) for k in self.terms), default=-1)

    def homogeneous(self, d: int) -> "Poly":
        return self._new({k: v for k, v in self.terms.items() if sum(k) == d})

    def truncate(self, d: int) -> "Poly":
        """Drop all monomials of total degree greater than ``d``."""
        return self._new({k: v for k, v in self.terms.items() if sum(k) <= d})

    def diff(self, name: str) -> "Poly":
        i = self.variables.index(name)
        out: dict[Monomial, Fraction] = {}
        for k, v in self.terms.items():
            if k[i]:
                nk = k[:i] + (k[i] - 1,) + k[i + 1 :]
                out[nk] = out.get(nk, 0) + v * k[i]
        return self._new(out)

    def evaluate(self, point: Mapping[str, object]):
        vals = [point[v] for v in self.variables]
        total = 0
        for k, c in self.terms.items():
            term = c
            for x, e in zip(vals, k):
                if e:
                    term = term * x**e
            total = total + term
        return total

    def substitute_zero(self, names: Iterable[str]) -> "Poly":
        idx = [self.variables.index(n) for n in names]
        return self._new({k: v for k, v in self.terms.items() if all(k[i] == 0 for i in idx)})

    def max_abs_coeff(self) -> Fraction:
        return max((abs(v) for v in self.terms.values()), default=Fraction(0))

    def sorted_terms(self) -> list[tuple[Monomial, Fraction]]:
        return sorted(self.terms.items(), key=lambda kv: (sum(kv[0]), tuple(-e for e in kv[0])))

    def to_expr(self) -> E.Expr:
        parts = []
        for mono, c in self.sorted_terms():
            factors = [E.power(E.Var(v), e) for v, e in zip(self.variables, mono) if e]
            m = E.ONE
            for f in factors:
                m = E.mul(m, f)
            parts.append(E.mul(E.Const(c), m))
        return E.sum_exprs(parts)

    def to_string(self) -> str:
        if not self.terms:
            return "0"
        out = ""
        for mono, c in self.sorted_terms():
            factors = [v if e == 1 else f"{v}^{e}" for v, e in zip(self.variables, mono) if e]
            mag = abs(c)
            body = "*".join(([str(mag)] if mag != 1 or not factors else []) + factors)
            if not out:
                out = body if c > 0 else "-" + body
            else:
                out += (" + " if c > 0 else " - ") + body
        return out


def to_poly(e: E.Expr, variables: Sequence[str]) -> Poly:
    """Expand ``e`` into a :class:`Poly`; raises ``NotPolynomialError`` otherwise."""
    variables = tuple(variables)
    memo: dict[int, Poly] = {}

    def go(n: E.Expr) -> Poly:
        key = id(n)
        if key in memo:
            return memo[key]
        if isinstance(n, E.Const):
            out = Poly.const(variables, n.value)
        elif isinstance(n, E.Var):
            if n.name not in variables:
                raise E.NotPolynomialError(f"variable {n.name!r} not in {variables}")
            out = Poly.var(variables, n.name)
        elif isinstance(n, E.Neg):
            out = -go(n.arg)
        elif isinstance(n, E.Add):
            out = go(n.left) + go(n.right)
        elif isinstance(n, E.Sub):
            out = go(n.left) - go(n.right)
        elif isinstance(n, E.Mul):
            a = go(n.left)
            out = a if a.is_zero() else a * go(n.right)
        elif isinstance(n, E.Div):
            a = go(n.left)
            b = go(n.right)
            if b.degree() != 0:
                if a.is_zero():
                    out = a
                else:
                    raise E.NotPolynomialError("division by a non-constant")
            else:
                out = a * (1 / next(iter(b.terms.values())))
        elif isinstance(n, E.Pow):
            b = go(n.base)
            if n.exp < 0:
                if b.degree() != 0:
                    raise E.NotPolynomialError("negative power of a non-constant")
                out = Poly.const(variables, next(iter(b.terms.values())) ** n.exp)
            else:
                out = b**n.exp
        else:
            raise E.NotPolynomialError(f"transcendental node {n.name}")
        memo[key] = out
        return out

    return go(e)


def try_poly(e: E.Expr, variables: Sequence[str]) -> Poly | None:
    try:
        return to_poly(e, variables)
    except E.NotPolynomialError:
        return None


def monomials(nvars: int, degree: int) -> list[Monomial]:
    """All exponent tuples of exactly ``degree`` in ``nvars`` variables (lex order)."""
    if nvars == 0:
        return [()] if degree == 0 else []
    if nvars == 1:
        return [(degree,)]
    out = []
    for first in range(degree, -1, -1):
        for rest in monomials(nvars - 1, degree - first):
            out.append((first,) + rest)
    return out
