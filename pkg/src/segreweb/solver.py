"""Jet-level solver for the m = 2 heavenly equation and solution certificates.

theta is a polynomial in (x1, x2, y1, y2).  Writing theta^(k) for its
homogeneous part of degree k, the degree-d part of the residual

    theta_11 theta_22 - theta_12^2 - d_{y1} d_{x2} theta + d_{y2} d_{x1} theta

depends on theta^(d+2) only affinely: through the linear y-x terms and through
products with the constant block theta^(2)_ab.  Levels d = 2 .. D-2 are solved
in turn; every level is an exact rational min-norm solve.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from . import expr as E
from .heavenly import (
    HeavenlySpec,
    ThetaSpec,
    curvature_from_R,
    eq1_residual,
    heavenly_frames,
    heavenly_residual,
    lax_commutators,
    theta_to_R,
)
from .poly import Monomial, Poly, monomials, to_poly

VARS = ("x1", "x2", "y1", "y2")


class SolverError(ValueError):
    pass


class InfeasibleLevel(SolverError):
    def __init__(self, level: int, rows: list[int]):
        super().__init__(f"level {level} is inconsistent (equations {rows})")
        self.level = level
        self.rows = rows


# ---------------------------------------------------------------------------
# exact linear algebra


Row = dict[int, Fraction]


def _eliminate(rows: list[Row], rhs: list[Fraction]) -> tuple[list[Row], list[Fraction], list[int]]:
    """Gauss-Jordan on sparse rows; returns (independent rows, their rhs, inconsistent row indices)."""
    rows = [dict(r) for r in rows]
    rhs = list(rhs)
    done: list[tuple[int, Row, Fraction]] = []  # (pivot column, row, rhs)
    bad = []
    for i, (r, v) in enumerate(zip(rows, rhs)):
        for c, prow, pv in done:
            f = r.get(c)
            if f:
                for k, x in prow.items():
                    y = r.get(k, 0) - f * x
                    if y:
                        r[k] = y
                    else:
                        r.pop(k, None)
                v -= f * pv
        if not r:
            if v != 0:
                bad.append(i)
            continue
        c = min(r)
        p = r[c]
        r = {k: x / p for k, x in r.items()}
        v /= p
        # keep earlier pivot rows reduced in the new pivot column
        for j, (cj, prow, pv) in enumerate(done):
            f = prow.get(c)
            if f:
                for k, x in r.items():
                    y = prow.get(k, 0) - f * x
                    if y:
                        prow[k] = y
                    else:
                        prow.pop(k, None)
                done[j] = (cj, prow, pv - f * v)
        done.append((c, r, v))
    return [d[1] for d in done], [d[2] for d in done], bad


def min_norm_solve(A: list[list[Fraction]], b: list[Fraction]) -> tuple[list[Fraction], int]:
    """Minimum Euclidean norm solution of A u = b over Q, and rank(A).

    Reduces to an equivalent full-row-rank system A' u = b' and returns
    u = A'^T (A' A'^T)^{-1} b'.  Raises InfeasibleLevel(-1, ...) if A u = b
    has no solution.
    """
    n = len(A[0]) if A else 0
    sparse = [{c: Fraction(x) for c, x in enumerate(r) if x} for r in A]
    red, br, bad = _eliminate(sparse, [Fraction(v) for v in b])
    if bad:
        raise InfeasibleLevel(-1, bad)
    rank = len(red)
    if rank == 0:
        return [Fraction(0)] * n, 0
    G = [[Fraction(0)] * rank for _ in range(rank)]
    for i in range(rank):
        for j in range(i, rank):
            ri, rj = red[i], red[j]
            if len(rj) < len(ri):
                ri, rj = rj, ri
            g = sum((x * rj[k] for k, x in ri.items() if k in rj), Fraction(0))
            G[i][j] = G[j][i] = g
    z = _solve_square(G, br)
    u = [Fraction(0)] * n
    for zi, r in zip(z, red):
        if zi:
            for k, x in r.items():
                u[k] += x * zi
    return u, rank


def _solve_square(G: list[list[Fraction]], b: list[Fraction]) -> list[Fraction]:
    n = len(G)
    M = [list(r) + [v] for r, v in zip(G, b)]
    for c in range(n):
        piv = next(i for i in range(c, n) if M[i][c] != 0)
        M[c], M[piv] = M[piv], M[c]
        p = M[c][c]
        M[c] = [x / p for x in M[c]]
        for i in range(n):
            if i != c and M[i][c] != 0:
                f = M[i][c]
                M[i] = [x - f * y if y else x for x, y in zip(M[i], M[c])]
    return [M[i][n] for i in range(n)]


# ---------------------------------------------------------------------------
# residual on polynomials


def _d(p: Poly, *names: str) -> Poly:
    for n in names:
        p = p.diff(n)
    return p


def residual_poly(theta: Poly) -> Poly:
    """Heavenly residual of a polynomial theta, computed on Poly directly."""
    t11 = _d(theta, "x1", "x1")
    t22 = _d(theta, "x2", "x2")
    t12 = _d(theta, "x1", "x2")
    return t11 * t22 - t12 * t12 - _d(theta, "y1", "x2") + _d(theta, "y2", "x1")


def residual_via_expr(theta: Poly) -> Poly:
    """The same residual through the symbolic heavenly system (independent route)."""
    ts = ThetaSpec(2, {(1, 2): theta.to_expr()}, {})
    return to_poly(heavenly_residual(ts)[((1, 2), (1, 2))], VARS)


def _linear_part(mono: Monomial, h: Mapping[str, Fraction]) -> Poly:
    """Coefficient column of a degree-(d+2) unknown at level d."""
    mu = Poly(VARS, {mono: Fraction(1)})
    lin = _d(mu, "x1", "x1") * h["22"] + _d(mu, "x2", "x2") * h["11"] - _d(mu, "x1", "x2") * (2 * h["12"])
    return lin - _d(mu, "y1", "x2") + _d(mu, "y2", "x1")


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LevelReport:
    level: int
    unknowns: int
    equations: int
    rank: int

    @property
    def nullity(self) -> int:
        return self.unknowns - self.rank

    @property
    def unique(self) -> bool:
        return self.nullity == 0

    def as_dict(self) -> dict:
        return {
            "level": self.level,
            "unknowns": self.unknowns,
            "equations": self.equations,
            "rank": self.rank,
            "nullity": self.nullity,
            "unique": self.unique,
        }


@dataclass(frozen=True)
class JetSolution:
    D: int
    theta: Poly
    seed: Poly
    levels: tuple[LevelReport, ...] = ()
    residual: Poly = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.residual is None:
            object.__setattr__(self, "residual", residual_poly(self.theta))

    @property
    def certified_order(self) -> int:
        """Residual vanishes through this total degree."""
        return self.D - 2

    @property
    def unique(self) -> bool:
        return all(l.unique for l in self.levels)

    def residual_clean(self) -> bool:
        return all(sum(k) > self.D - 2 for k in self.residual.terms)

    def theta_json(self) -> dict[str, str]:
        return {str(tuple(k)).replace(" ", ""): str(v) for k, v in self.theta.sorted_terms()}


def parse_seed(seed: str | E.Expr | Poly) -> Poly:
    if isinstance(seed, Poly):
        return seed
    e = E.parse(seed, VARS) if isinstance(seed, str) else seed
    return to_poly(e, VARS)


def from_theta(theta, D: int) -> JetSolution:
    """Wrap a given polynomial theta as a jet of order D without solving."""
    p = parse_seed(theta)
    return JetSolution(D, p, p)


def jet_solve(seed, D: int) -> JetSolution:
    if D < 3:
        raise SolverError("jet_solve needs D >= 3")
    s = parse_seed(seed)
    if s.degree() > 3:
        raise SolverError("seed must have degree <= 3")
    low = residual_poly(s).truncate(1)
    if not low.is_zero():
        raise SolverError(f"seed residual does not vanish at orders <= 1: {low.to_string()}")
    h2 = s.homogeneous(2)
    h = {
        "11": _d(h2, "x1", "x1").evaluate(dict.fromkeys(VARS, Fraction(0))),
        "22": _d(h2, "x2", "x2").evaluate(dict.fromkeys(VARS, Fraction(0))),
        "12": _d(h2, "x1", "x2").evaluate(dict.fromkeys(VARS, Fraction(0))),
    }
    h = {k: Fraction(v) for k, v in h.items()}
    theta = s
    reports = []
    for d in range(2, D - 1):
        unknowns = monomials(4, d + 2)
        eqs = monomials(4, d)
        row_of = {m: i for i, m in enumerate(eqs)}
        known = residual_poly(theta).homogeneous(d)
        A = [[Fraction(0)] * len(unknowns) for _ in eqs]
        for c, mono in enumerate(unknowns):
            for k, v in _linear_part(mono, h).homogeneous(d).terms.items():
                A[row_of[k]][c] = v
        b = [-known.terms.get(m, Fraction(0)) for m in eqs]
        try:
            u, rank = min_norm_solve(A, b)
        except InfeasibleLevel as exc:
            raise InfeasibleLevel(d, exc.rows) from None
        theta = theta + Poly(VARS, {mono: v for mono, v in zip(unknowns, u) if v != 0})
        reports.append(LevelReport(d, len(unknowns), len(eqs), rank))
    sol = JetSolution(D, theta, s, tuple(reports))
    if not sol.residual_clean():
        raise SolverError("internal error: residual survives below the target order")
    return sol


# ---------------------------------------------------------------------------
# certificate


def _lowest(p: Poly) -> int | None:
    return p.lowest_degree()


def _zero_through(polys: Sequence[Poly]) -> int | None:
    """Largest N with every polynomial vanishing through degree N; None if all are zero."""
    lows = [p.lowest_degree() for p in polys if not p.is_zero()]
    return None if not lows else min(lows) - 1


def _fmt_order(n: int | None):
    return "exact" if n is None else n


def certify(sol: JetSolution) -> dict:
    """Check each clause of the germ-existence statement at jet order.

    Clause orders: the heavenly residual must vanish through D-2; eq1
    and the Lax commutators, one x-derivative further down, through D-3.
    """
    K = sol.certified_order
    report: dict = {"D": sol.D, "certified_order": K}

    # (a) heavenly residual, independent symbolic route
    res = residual_via_expr(sol.theta)
    low = _lowest(res)
    a = {"lowest_surviving_degree": low, "witness": None}
    if low is not None:
        a["witness"] = {str(k).replace(" ", ""): str(v) for k, v in res.homogeneous(low).sorted_terms()}
        a["witness_expr"] = res.homogeneous(low).to_string()
    a["pass"] = low is None or low > K
    report["a"] = a

    # (b) eq1 for R = theta_to_R(theta)
    hs = theta_to_R(ThetaSpec(2, {(1, 2): sol.theta.to_expr()}, {}))
    eq1 = [to_poly(e, VARS) for e in eq1_residual(hs).values()]
    eq1_order = _zero_through(eq1)
    b = {"R": [to_poly(r, VARS).to_string() for r in hs.R], "zero_through": _fmt_order(eq1_order)}
    b["pass"] = eq1_order is None or eq1_order >= K - 1
    report["b"] = b

    # (c) Lax commutators at t = 1, 2, 3, truncated to the eq1 order
    lax_order = None
    worst = Fraction(0)
    lax_polys = []
    for t in (1, 2, 3):
        for vec in lax_commutators(hs, t).values():
            lax_polys.extend(to_poly(c, VARS) for c in vec)
    lax_order = _zero_through(lax_polys)
    cut = K - 1
    for p in lax_polys:
        worst = max(worst, p.truncate(cut).max_abs_coeff())
    c = {
        "t": [1, 2, 3],
        "zero_through": _fmt_order(lax_order),
        "truncated_to": cut,
        "max_abs_retained": str(worst),
        "orders_consistent": lax_order == eq1_order,
    }
    c["pass"] = worst == 0 and c["orders_consistent"]
    report["c"] = c

    # (d) Ricci trace
    _, trace = curvature_from_R(hs)
    bad = [k for k, e in trace.items() if not to_poly(e, VARS).is_zero()]
    report["d"] = {"ricci_trace_zero": not bad, "pass": not bad}

    # (e) Chern connection of the three foliations V_0, V_inf, V_1 at the origin
    report["e"] = _clause_e(hs, K)
    report["pass"] = all(report[k]["pass"] for k in "abcde")
    return report


def _clause_e(hs: HeavenlySpec, K: int) -> dict:
    from .web import FrameConnection, _riemann

    origin = dict.fromkeys(VARS, Fraction(0))
    conn = FrameConnection(heavenly_frames(hs))
    G = conn.christoffel()
    ev = E.Evaluator(origin)
    n = 4
    tors = max(abs(ev(E.sub(G[a][b][c], G[b][a][c]))) for a in range(n) for b in range(n) for c in range(n))
    out = {"torsion_at_origin": str(tors)}
    ric = None
    if K >= 2:
        # Ricci needs one derivative of Gamma; meaningful once the jet fixes theta to order 4
        riem = _riemann(G, VARS)
        ric = max(
            abs(ev(E.sum_exprs(riem[a][b][c][a] for a in range(n)))) for b in range(n) for c in range(n)
        )
        out["ricci_at_origin"] = str(ric)
    out["lee_ricci"] = "not applicable: no web function is reconstructed from theta"
    out["pass"] = tors == 0 and (ric is None or ric == 0)
    return out


def solution_json(sol: JetSolution, certificate: dict | None = None) -> str:
    doc = {"D": sol.D, "theta": sol.theta_json()}
    if certificate is not None:
        doc["certificate"] = certificate
    return json.dumps(doc, indent=2, sort_keys=True)


def grid_residual(theta_values: np.ndarray, spacing: Sequence[float]) -> np.ndarray:
    """Heavenly residual of sampled theta on a regular (x1, x2, y1, y2) grid.

    Second-order central differences; the outermost layer is dropped.  For
    externally produced data only.
    """
    if theta_values.ndim != 4:
        raise SolverError("grid must be 4-dimensional (x1, x2, y1, y2)")
    h = [float(s) for s in spacing]
    th = np.asarray(theta_values, dtype=float)

    def d1(a, ax):
        return (np.roll(a, -1, ax) - np.roll(a, 1, ax)) / (2 * h[ax])

    def d2(a, ax):
        return (np.roll(a, -1, ax) - 2 * a + np.roll(a, 1, ax)) / h[ax] ** 2

    t11 = d2(th, 0)
    t22 = d2(th, 1)
    t12 = d1(d1(th, 0), 1)
    r = t11 * t22 - t12**2 - d1(d1(th, 2), 1) + d1(d1(th, 3), 0)
    inner = tuple(slice(2, -2) for _ in range(4))
    return r[inner]


def sample_grid(theta: Poly, n: int = 9, radius: float = 0.5) -> tuple[np.ndarray, list[float]]:
    axis = np.linspace(-radius, radius, n)
    X = np.meshgrid(axis, axis, axis, axis, indexing="ij")
    vals = np.zeros_like(X[0])
    for mono, c in theta.terms.items():
        term = float(c) * np.ones_like(X[0])
        for g, e in zip(X, mono):
            if e:
                term = term * g**e
        vals = vals + term
    step = float(axis[1] - axis[0])
    return vals, [step] * 4


__all__ = [
    "JetSolution",
    "LevelReport",
    "SolverError",
    "InfeasibleLevel",
    "jet_solve",
    "from_theta",
    "parse_seed",
    "certify",
    "residual_poly",
    "residual_via_expr",
    "min_norm_solve",
    "solution_json",
    "grid_residual",
    "sample_grid",
]


