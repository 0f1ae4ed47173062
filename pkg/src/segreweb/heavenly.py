"""Potentials R^k, the Lax tuple, theta-potentials and the generalized heavenly system.

Index conventions: all public indices are 1-based, matching the coordinate
names x1..xm, y1..ym.  Residuals are LHS - RHS of the respective equations.

Sign convention of the heavenly system: with R^i = sum_{j != i} (-1)^{i+j}
d_{x_j} theta_{ji}, the equation that makes eq1 hold is

    sum_{p,q} (-1)^{p+q} [ (d_i d_p theta_pl)(d_j d_q theta_qk)
                           - (d_j d_p theta_pl)(d_i d_q theta_qk) ]
        = d_{y_i} d_{x_j} theta_kl - d_{y_j} d_{x_i} theta_kl + (d_x f_ij)_kl

which for m = 2 is exactly

    theta_11 theta_22 - theta_12^2 = d_{y_1} d_{x_2} theta - d_{y_2} d_{x_1} theta.

The y-term carries the opposite sign of the general display one would read
off by analogy with eq1; the m = 2 reduction and the pipeline test
``eq1_residual(theta_to_R(ts))`` pin it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from math import comb
from typing import Mapping, Sequence

from . import expr as E
from .exterior import ExprForm, ExprMatrix, exterior_derivative
from .poly import try_poly
from .sampling import coords as coord_names
from .sampling import ys

Vector = tuple[E.Expr, ...]


class HeavenlyError(ValueError):
    pass


@dataclass(frozen=True)
class HeavenlySpec:
    m: int
    R: tuple[E.Expr, ...]

    def __post_init__(self):
        if len(self.R) != self.m:
            raise HeavenlyError(f"need m={self.m} potentials R, got {len(self.R)}")

    @classmethod
    def from_strings(cls, R: Sequence[str]) -> "HeavenlySpec":
        names = coord_names(len(R))
        return cls(len(R), tuple(E.parse(s, names) for s in R))

    @property
    def coords(self) -> tuple[str, ...]:
        return coord_names(self.m)

    def x(self, i: int) -> str:
        return f"x{i}"

    def y(self, i: int) -> str:
        return f"y{i}"

    def r(self, k: int) -> E.Expr:
        return self.R[k - 1]


@dataclass(frozen=True)
class ThetaSpec:
    """theta_ij for i < j (1-based) and optional (m-3)-forms f_ij in the dx's."""

    m: int
    theta: Mapping[tuple[int, int], E.Expr]
    f: Mapping[tuple[int, int], ExprForm] = field(default_factory=dict)

    def __post_init__(self):
        if self.m < 2:
            raise HeavenlyError("m must be at least 2")
        for (i, j) in self.theta:
            if not (1 <= i < j <= self.m):
                raise HeavenlyError(f"theta index ({i},{j}) must satisfy 1 <= i < j <= m")
        if self.m == 2 and any(not form.is_syntactically_zero() for form in self.f.values()):
            raise HeavenlyError("there are no forms f_ij when m = 2")
        for key, form in self.f.items():
            if form.degree != self.m - 3:
                raise HeavenlyError(f"f{key} must have degree m-3 = {self.m - 3}")

    @classmethod
    def from_strings(cls, m: int, theta: Mapping[str, str], f: Mapping[str, Mapping[str, str]] | None = None) -> "ThetaSpec":
        names = coord_names(m)
        th = {}
        for key, src in theta.items():
            i, j = int(key[0]), int(key[1:])
            th[(i, j)] = E.parse(src, names)
        forms = {}
        for key, comps in (f or {}).items():
            i, j = int(key[0]), int(key[1:])
            coeffs = {}
            for idx, src in comps.items():
                # multi-index given as digits of x-indices, e.g. "1" or "13"
                coeffs[tuple(int(c) - 1 for c in idx)] = E.parse(src, names)
            forms[(i, j)] = ExprForm(names, m - 3, coeffs)
        return cls(m, th, forms)

    @property
    def coords(self) -> tuple[str, ...]:
        return coord_names(self.m)

    def t(self, i: int, j: int) -> E.Expr:
        """theta_ij with theta_ji = -theta_ij and theta_ii = 0."""
        if i == j:
            return E.ZERO
        if i < j:
            return self.theta.get((i, j), E.ZERO)
        return E.neg(self.theta.get((j, i), E.ZERO))

    def f_form(self, i: int, j: int) -> ExprForm:
        return self.f.get((i, j), ExprForm.zero(self.coords, self.m - 3))


def _dx(e: E.Expr, i: int) -> E.Expr:
    return E.differentiate(e, f"x{i}")


def _dy(e: E.Expr, i: int) -> E.Expr:
    return E.differentiate(e, f"y{i}")


def pairs(m: int) -> list[tuple[int, int]]:
    return list(combinations(range(1, m + 1), 2))


# ---------------------------------------------------------------------------
# eq1, boundary normalization, Lax tuple, curvature


def eq1_residual(spec: HeavenlySpec) -> dict[tuple[int, int, int], E.Expr]:
    m = spec.m
    out = {}
    for i, j in pairs(m):
        for k in range(1, m + 1):
            Rk = spec.r(k)
            terms = []
            for l in range(1, m + 1):
                Rl = spec.r(l)
                terms.append(E.mul(_dx(Rl, i), _dx(_dx(Rk, l), j)))
                terms.append(E.neg(E.mul(_dx(Rl, j), _dx(_dx(Rk, l), i))))
            terms.append(E.neg(_dy(_dx(Rk, i), j)))
            terms.append(_dy(_dx(Rk, j), i))
            out[(i, j, k)] = E.sum_exprs(terms)
    return out


def boundary_check(spec: HeavenlySpec) -> tuple[bool, list[str]]:
    """R^k, d_{x_i} R^k and d_{x_i} d_{x_j} R^k vanish on {x = 0}."""
    m = spec.m
    at_zero = {f"x{i}": E.ZERO for i in range(1, m + 1)}
    violations = []
    ycoords = ys(m)

    def vanishes(e: E.Expr) -> bool:
        restricted = E.substitute(e, at_zero)
        p = try_poly(restricted, ycoords)
        if p is not None:
            return p.is_zero()
        from .sampling import is_identically_zero

        return is_identically_zero(restricted)

    for k in range(1, m + 1):
        Rk = spec.r(k)
        if not vanishes(Rk):
            violations.append(f"R^{k}(0,y) != 0")
        for i in range(1, m + 1):
            if not vanishes(_dx(Rk, i)):
                violations.append(f"d_x{i} R^{k}(0,y) != 0")
        for i in range(1, m + 1):
            for j in range(i, m + 1):
                if not vanishes(_dx(_dx(Rk, i), j)):
                    violations.append(f"d_x{i} d_x{j} R^{k}(0,y) != 0")
    return not violations, violations


def lax_fields(spec: HeavenlySpec, t) -> list[Vector]:
    """L_i(t) = d_{x_i} + t d_{y_i} + t sum_j d_{x_i} R^j d_{x_j} as coordinate vectors."""
    m = spec.m
    t = E.as_expr(t)
    out = []
    for i in range(1, m + 1):
        comps = [E.mul(t, _dx(spec.r(j), i)) for j in range(1, m + 1)]
        comps[i - 1] = E.add(E.ONE, comps[i - 1])
        comps += [t if k == i else E.ZERO for k in range(1, m + 1)]
        out.append(tuple(comps))
    return out


def vector_bracket(coords: Sequence[str], U: Vector, V: Vector) -> Vector:
    n = len(coords)
    out = []
    for c in range(n):
        terms = []
        for a in range(n):
            if not E.is_const(U[a], 0):
                terms.append(E.mul(U[a], E.differentiate(V[c], coords[a])))
            if not E.is_const(V[a], 0):
                terms.append(E.neg(E.mul(V[a], E.differentiate(U[c], coords[a]))))
        out.append(E.sum_exprs(terms))
    return tuple(out)


def lax_commutators(spec: HeavenlySpec, t) -> dict[tuple[int, int], Vector]:
    """Coefficients of [L_i(t), L_j(t)], i < j, in the frame (d_x, d_y).

    The x-components equal t^2 * eq1_residual[(i, j, k)]; the y-components
    vanish identically.
    """
    L = lax_fields(spec, t)
    names = spec.coords
    return {(i, j): vector_bracket(names, L[i - 1], L[j - 1]) for i, j in pairs(spec.m)}


def curvature_from_R(spec: HeavenlySpec) -> tuple[dict[tuple[int, int, int, int], E.Expr], dict[tuple[int, int], E.Expr]]:
    """Components R^k_{ijl} = d_i d_j d_l R^k keyed (k, i, j, l) and the traces sum_k R^k_{ijk}."""
    m = spec.m
    rng = range(1, m + 1)
    comps = {}
    for k in rng:
        for i in rng:
            for j in rng:
                for l in rng:
                    comps[(k, i, j, l)] = _dx(_dx(_dx(spec.r(k), i), j), l)
    trace = {(i, j): E.sum_exprs(comps[(k, i, j, k)] for k in rng) for i in rng for j in rng}
    return comps, trace


# ---------------------------------------------------------------------------
# theta potentials


def theta_to_R(ts: ThetaSpec) -> HeavenlySpec:
    m = ts.m
    R = []
    for i in range(1, m + 1):
        terms = []
        for j in range(1, m + 1):
            if j == i:
                continue
            d = _dx(ts.t(j, i), j)
            terms.append(d if (i + j) % 2 == 0 else E.neg(d))
        R.append(E.sum_exprs(terms))
    return HeavenlySpec(m, tuple(R))


def x_complement(m: int, omit: Sequence[int]) -> list[str]:
    return [f"x{s}" for s in range(1, m + 1) if s not in omit]


def rho_form(spec: HeavenlySpec) -> ExprForm:
    """rho = sum_i (-1)^i R^i dx_1 ^ ... (dx_i omitted) ... ^ dx_m."""
    m = spec.m
    out = ExprForm.zero(spec.coords, m - 1)
    for i in range(1, m + 1):
        c = spec.r(i) if i % 2 == 0 else E.neg(spec.r(i))
        out = out + ExprForm.basis_form(spec.coords, x_complement(m, [i]), c)
    return out


def theta_potential_form(ts: ThetaSpec) -> ExprForm:
    """sum_{i<j} theta_ij ^_{s != i,j} dx_s; its d_x equals rho up to the global sign convention."""
    m = ts.m
    out = ExprForm.zero(ts.coords, m - 2)
    for (i, j), th in ts.theta.items():
        out = out + ExprForm.basis_form(ts.coords, x_complement(m, [i, j]), th)
    return out


def gamma_form(spec: HeavenlySpec, i: int, j: int) -> ExprForm:
    m = spec.m
    out = ExprForm.zero(spec.coords, m - 2)
    for l, k in pairs(m):
        Rl, Rk = spec.r(l), spec.r(k)
        c = E.sub(E.mul(_dx(Rl, i), _dx(Rk, j)), E.mul(_dx(Rl, j), _dx(Rk, i)))
        out = out + ExprForm.basis_form(spec.coords, x_complement(m, [l, k]), c)
    return out


def beta_form(ts: ThetaSpec, i: int, j: int) -> ExprForm:
    m = ts.m
    out = ExprForm.zero(ts.coords, m - 2)
    for l, k in pairs(m):
        th = ts.t(k, l)
        c = E.sub(_dy(_dx(th, i), j), _dy(_dx(th, j), i))
        out = out + ExprForm.basis_form(ts.coords, x_complement(m, [l, k]), c)
    return out


def df_coefficient(ts: ThetaSpec, i: int, j: int, k: int, l: int) -> E.Expr:
    """Coefficient of d_x f_ij next to ^_{s != k,l} dx_s (increasing order)."""
    if ts.m < 3:
        return E.ZERO
    df = exterior_derivative(ts.f_form(i, j), "x")
    return df.coefficient(x_complement(ts.m, [k, l]))


def heavenly_residual(ts: ThetaSpec) -> dict[tuple[tuple[int, int], tuple[int, int]], E.Expr]:
    m = ts.m
    rng = range(1, m + 1)
    # second x-derivatives of sum_p (-1)^p theta_pl, reused across (i, j)
    h = {}
    for l in rng:
        for a in rng:
            terms = []
            for p in rng:
                d = _dx(_dx(ts.t(p, l), a), p)
                terms.append(d if p % 2 == 0 else E.neg(d))
            h[(a, l)] = E.sum_exprs(terms)
    out = {}
    for i, j in pairs(m):
        for k, l in pairs(m):
            quad = E.sub(E.mul(h[(i, l)], h[(j, k)]), E.mul(h[(j, l)], h[(i, k)]))
            th = ts.t(k, l)
            rhs = E.sub(_dy(_dx(th, j), i), _dy(_dx(th, i), j))
            res = E.sub(quad, rhs)
            if m >= 3:
                res = E.sub(res, df_coefficient(ts, i, j, k, l))
            out[((i, j), (k, l))] = res
    return out


def plebanski_m2(theta: E.Expr) -> E.Expr:
    """theta_11 theta_22 - theta_12^2 - d_{y1} d_{x2} theta + d_{y2} d_{x1} theta."""
    t11 = _dx(_dx(theta, 1), 1)
    t22 = _dx(_dx(theta, 2), 2)
    t12 = _dx(_dx(theta, 1), 2)
    return E.sum_exprs(
        [E.mul(t11, t22), E.neg(E.mul(t12, t12)), E.neg(_dy(_dx(theta, 2), 1)), _dy(_dx(theta, 1), 2)]
    )


def system_shape(m: int) -> tuple[int, int, int]:
    """(equations, unknown functions, arbitrary functions) of the heavenly system."""
    if m < 2:
        raise HeavenlyError("system_shape needs m >= 2")
    c2 = comb(m, 2)
    return c2 * c2, c2, comb(m, 3) * c2


# ---------------------------------------------------------------------------
# hyper-para-complex structure


@dataclass(frozen=True)
class ParaComplexTriple:
    I: ExprMatrix
    K: ExprMatrix
    J: ExprMatrix


def adapted_frame(spec: HeavenlySpec) -> ExprMatrix:
    """Columns d_{x_1..m}, e_{1..m} with e_i = d_{y_i} + sum_j d_{x_i} R^j d_{x_j}."""
    m = spec.m
    n = 2 * m
    F = [[E.ZERO] * n for _ in range(n)]
    for i in range(m):
        F[i][i] = E.ONE
        F[m + i][m + i] = E.ONE
        for j in range(m):
            F[j][m + i] = _dx(spec.r(j + 1), i + 1)
    return ExprMatrix(F)


def para_complex_triple(spec: HeavenlySpec) -> ParaComplexTriple:
    m = spec.m
    n = 2 * m
    F = adapted_frame(spec)
    # F = [[Id, A], [0, Id]] so F^{-1} = [[Id, -A], [0, Id]]
    Finv = ExprMatrix(
        [[(E.neg(F[r, c]) if (r < m <= c) else F[r, c]) for c in range(n)] for r in range(n)]
    )
    diag = ExprMatrix([[(E.ONE if r < m else E.Const(-1)) if r == c else E.ZERO for c in range(n)] for r in range(n)])
    swap = ExprMatrix(
        [[E.Const(-1) if (c == r + m or r == c + m) else E.ZERO for c in range(n)] for r in range(n)]
    )
    I = F @ diag @ Finv
    K = F @ swap @ Finv
    J = I @ K
    return ParaComplexTriple(I, K, J)


def v_t_frame(spec: HeavenlySpec, t) -> list[Vector]:
    """Vectors d_{x_i} + t e_i spanning V_t (the Lax fields L_i(t))."""
    return lax_fields(spec, t)


def heavenly_frames(spec: HeavenlySpec):
    """FrameTriple (V_0, V_inf, V_1) of the structure; torsion-free iff eq1 holds."""
    from .web import FrameTriple

    m = spec.m
    n = 2 * m
    F = adapted_frame(spec)
    f1 = tuple(tuple(F[r, c] for r in range(n)) for c in range(m))
    f2 = tuple(tuple(F[r, c] for r in range(n)) for c in range(m, n))
    f3 = tuple(tuple(E.add(a, b) for a, b in zip(f1[i], f2[i])) for i in range(m))
    return FrameTriple(m, spec.coords, f1, f2, f3)
