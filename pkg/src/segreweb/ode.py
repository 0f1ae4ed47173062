"""Invariants of second-order ODE systems x'' = F(t, x, x').

Jet coordinates are ``t, x1..xm, y1..ym`` with y_i standing for dx_i/dt.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

from . import expr as E
from .exterior import ExprMatrix
from .poly import try_poly


class OdeError(ValueError):
    pass


def jet_coords(m: int) -> tuple[str, ...]:
    return ("t",) + tuple(f"x{i}" for i in range(1, m + 1)) + tuple(f"y{i}" for i in range(1, m + 1))


@dataclass(frozen=True)
class OdeSpec:
    m: int
    F: tuple[E.Expr, ...]

    def __post_init__(self):
        if len(self.F) != self.m:
            raise OdeError(f"need m={self.m} right-hand sides, got {len(self.F)}")
        allowed = set(self.coords)
        for i, f in enumerate(self.F):
            extra = f.free_vars() - allowed
            if extra:
                raise OdeError(f"F[{i}] uses non-jet variables {sorted(extra)}")

    @classmethod
    def from_strings(cls, F: Sequence[str]) -> "OdeSpec":
        names = jet_coords(len(F))
        return cls(len(F), tuple(E.parse(s, names) for s in F))

    @property
    def coords(self) -> tuple[str, ...]:
        return jet_coords(self.m)

    @property
    def x(self) -> tuple[str, ...]:
        return tuple(f"x{i}" for i in range(1, self.m + 1))

    @property
    def y(self) -> tuple[str, ...]:
        return tuple(f"y{i}" for i in range(1, self.m + 1))


@dataclass(frozen=True)
class JetField:
    """Vector field c_t d_t + sum c_x[i] d_{x_i} + sum c_y[i] d_{y_i} on J^1."""

    t: E.Expr
    x: tuple[E.Expr, ...]
    y: tuple[E.Expr, ...]

    def apply(self, f: E.Expr) -> E.Expr:
        m = len(self.x)
        terms = [E.mul(self.t, E.differentiate(f, "t"))]
        for i in range(m):
            terms.append(E.mul(self.x[i], E.differentiate(f, f"x{i + 1}")))
            terms.append(E.mul(self.y[i], E.differentiate(f, f"y{i + 1}")))
        return E.sum_exprs(terms)

    __call__ = apply


def total_derivative(spec: OdeSpec) -> JetField:
    """X_F = d_t + sum_i (y_i d_{x_i} + F_i d_{y_i})."""
    return JetField(E.ONE, tuple(E.Var(v) for v in spec.y), tuple(spec.F))


def _jacobi(F: Sequence[E.Expr], dx, dy, X) -> ExprMatrix:
    m = len(F)
    half = E.Const(Fraction(1, 2))
    quarter = E.Const(Fraction(1, 4))
    dyF = [[dy(F[j], i) for j in range(m)] for i in range(m)]  # dyF[i][j] = d_{y_i} F_j
    rows = []
    for i in range(m):
        row = []
        for j in range(m):
            quad = E.sum_exprs(E.mul(dyF[i][k], dyF[k][j]) for k in range(m))
            row.append(
                E.sum_exprs([E.neg(dx(F[j], i)), E.mul(half, X(dyF[i][j])), E.neg(E.mul(quarter, quad))])
            )
        rows.append(row)
    return ExprMatrix(rows)


def jacobi_endomorphism(spec: OdeSpec) -> ExprMatrix:
    """T_ij = -d_{x_i} F_j + 1/2 X_F(d_{y_i} F_j) - 1/4 sum_k d_{y_i} F_k d_{y_k} F_j."""
    X = total_derivative(spec)
    return _jacobi(
        spec.F,
        lambda e, i: E.differentiate(e, f"x{i + 1}"),
        lambda e, i: E.differentiate(e, f"y{i + 1}"),
        X.apply,
    )


@dataclass(frozen=True)
class BerwaldData:
    B: dict[tuple[int, int, int, int], E.Expr]  # keyed (l, i, j, k), 1-based
    trB: ExprMatrix
    divergence: E.Expr  # sum_k d_{y_k} F^k
    divergence_linear: bool | None  # None when not decidable by polynomial expansion


def berwald(spec: OdeSpec) -> BerwaldData:
    m = spec.m
    half = E.Const(Fraction(-1, 2))
    d = E.differentiate
    B = {}
    for l in range(m):
        for i in range(m):
            for j in range(m):
                for k in range(m):
                    B[(l + 1, i + 1, j + 1, k + 1)] = E.mul(half, d(d(d(spec.F[l], spec.y[i]), spec.y[j]), spec.y[k]))
    trB = ExprMatrix(
        [[E.sum_exprs(B[(k + 1, i + 1, j + 1, k + 1)] for k in range(m)) for j in range(m)] for i in range(m)]
    )
    div = E.sum_exprs(d(spec.F[k], spec.y[k]) for k in range(m))
    return BerwaldData(B, trB, div, divergence_is_linear_in_y(spec, div))


def divergence_is_linear_in_y(spec: OdeSpec, div: E.Expr) -> bool | None:
    """Polynomial degree test of sum_k d_{y_k} F^k in the y's (independent of trB)."""
    p = try_poly(div, spec.coords)
    if p is None:
        return None
    return p.degree_in(spec.y) <= 1


def wilczynski(spec: OdeSpec, T: ExprMatrix | None = None) -> ExprMatrix:
    """Trace-free part T - (tr T / m) Id."""
    T = T or jacobi_endomorphism(spec)
    m = spec.m
    tr_over_m = E.div(T.trace(), E.Const(m))
    return ExprMatrix([[E.sub(T[i, j], tr_over_m) if i == j else T[i, j] for j in range(m)] for i in range(m)])


# ---------------------------------------------------------------------------
# reparametrizations of the independent variable


def veronese_transform(spec: OdeSpec, a, b, c, d) -> OdeSpec:
    """System in the new variable t~ = (a t + b) / (c t + d), x~ = x.

    With phi(t) = (a t + b)/(c t + d) the prolongation is y~ = y / phi'(t) and
    F~ = F / phi'^2 - y~ phi'' / phi'^2, everything re-expressed through
    t = phi^{-1}(t~) = (d t~ - b) / (a - c t~).  The returned system uses the
    same variable names for the new coordinates.
    """
    a, b, c, d = (Fraction(v) for v in (a, b, c, d))
    det = a * d - b * c
    if det == 0:
        raise OdeError("Veronese transformation needs ad - bc != 0")
    tn = E.Var("t")
    # phi'(t_old) = det / (c t_old + d)^2 and c t_old + d = det / (a - c t~)
    s = E.sub(E.Const(a), E.mul(E.Const(c), tn))  # a - c t~
    phi1 = E.div(E.power(s, 2), E.Const(det))
    phi2 = E.div(E.mul(E.Const(-2 * c), E.power(s, 3)), E.Const(det * det))
    t_old = E.div(E.sub(E.mul(E.Const(d), tn), E.Const(b)), s)
    mapping = {"t": t_old}
    for v in spec.y:
        mapping[v] = E.mul(E.Var(v), phi1)
    Fn = []
    for i, f in enumerate(spec.F):
        f_old = E.substitute(f, mapping)
        yi = E.Var(spec.y[i])
        Fn.append(E.div(E.sub(f_old, E.mul(yi, phi2)), E.power(phi1, 2)))
    return OdeSpec(spec.m, tuple(Fn))


def mobius_inverse(a, b, c, d) -> tuple[Fraction, Fraction, Fraction, Fraction]:
    return tuple(Fraction(v) for v in (d, -b, -c, a))  # type: ignore[return-value]


def transform_point(p: Mapping[str, object], spec: OdeSpec, a, b, c, d) -> dict[str, object]:
    """Image of a jet point under the Veronese transformation (a, b, c, d)."""
    t = p["t"]
    a, b, c, d = (Fraction(v) for v in (a, b, c, d))
    if isinstance(t, float):
        a, b, c, d = float(a), float(b), float(c), float(d)
    den = c * t + d
    phi1 = (a * d - b * c) / den**2
    out = dict(p)
    out["t"] = (a * t + b) / den
    for v in spec.y:
        out[v] = p[v] / phi1
    return out


@dataclass(frozen=True)
class Reparametrized:
    """T of the system in t~ = phi(t), pulled back to the original jet coordinates."""

    T_new: ExprMatrix  # T~ evaluated at the image of (t, x, y)
    shift: ExprMatrix  # phi'^2 T~ - T
    schwarzian: E.Expr  # S(phi)(t)


def schwarzian(phi: E.Expr, var: str = "t") -> E.Expr:
    p1 = E.differentiate(phi, var)
    p2 = E.differentiate(p1, var)
    p3 = E.differentiate(p2, var)
    return E.sub(E.div(p3, p1), E.mul(E.Const(Fraction(3, 2)), E.power(E.div(p2, p1), 2)))


def reparametrize(spec: OdeSpec, phi: E.Expr) -> Reparametrized:
    """Jacobi endomorphism of the system written in t~ = phi(t).

    Works in the original coordinates: d/dx~ = d/dx, d/dy~ = phi' d/dy and
    X_{F~} = X_F / phi', with F~ = F / phi'^2 - y phi'' / phi'^3 expressed at
    the preimage point.  No inverse of phi is needed.
    """
    if phi.free_vars() - {"t"}:
        raise OdeError("phi must depend on t only")
    p1 = E.differentiate(phi, "t")
    p2 = E.differentiate(p1, "t")
    Fn = [
        E.sub(E.div(f, E.power(p1, 2)), E.div(E.mul(E.Var(spec.y[i]), p2), E.power(p1, 3)))
        for i, f in enumerate(spec.F)
    ]
    X = total_derivative(spec)
    Xn = lambda e: E.div(X.apply(e), p1)  # noqa: E731
    Tn = _jacobi(
        Fn,
        lambda e, i: E.differentiate(e, f"x{i + 1}"),
        lambda e, i: E.mul(p1, E.differentiate(e, f"y{i + 1}")),
        Xn,
    )
    T = jacobi_endomorphism(spec)
    shift = (Tn.scale(E.power(p1, 2))) - T
    return Reparametrized(Tn, shift, schwarzian(phi))


SCHWARZIAN_FACTOR = Fraction(-1, 2)


def schwarzian_shift(spec: OdeSpec, phi: E.Expr, points: Sequence[Mapping[str, object]] = ()) -> ExprMatrix:
    """phi'^2 T~ - T for the system reparametrized by t~ = phi(t).

    T~ is pulled back to the original jet point, and the factor phi'^2 makes
    the comparison tensorial.  The result is SCHWARZIAN_FACTOR * S(phi) * Id,
    independently of F.  Raises OdeError if phi' vanishes at one of ``points``.
    """
    p1 = E.differentiate(phi, "t")
    for p in points:
        if abs(float(E.evaluate(p1, p))) < 1e-12:
            raise OdeError(f"phi' vanishes at t = {p['t']}")
    return reparametrize(spec, phi).shift


def gauge_residual(spec: OdeSpec, ttilde: E.Expr, T: ExprMatrix | None = None) -> E.Expr:
    """g^2 tr T + g X_F^2(g) - 3/2 X_F(g)^2 with g = d_t t~ + y1 d_{x1} t~ + y2 d_{x2} t~."""
    if spec.m != 2:
        raise OdeError("the gauge equation is stated for m = 2")
    extra = ttilde.free_vars() - {"t", "x1", "x2"}
    if extra:
        raise OdeError(f"t~ must depend on (t, x1, x2) only, got {sorted(extra)}")
    T = T or jacobi_endomorphism(spec)
    d = E.differentiate
    g = E.sum_exprs([d(ttilde, "t"), E.mul(E.Var("y1"), d(ttilde, "x1")), E.mul(E.Var("y2"), d(ttilde, "x2"))])
    X = total_derivative(spec)
    Xg = X.apply(g)
    XXg = X.apply(Xg)
    return E.sum_exprs(
        [
            E.mul(E.power(g, 2), T.trace()),
            E.mul(g, XXg),
            E.neg(E.mul(E.Const(Fraction(3, 2)), E.power(Xg, 2))),
        ]
    )
