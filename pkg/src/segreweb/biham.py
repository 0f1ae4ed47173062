"""The Poisson pencil P(t) = sum_i L_i(t) ^ d_{p_i} and its Schouten bracket."""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from . import expr as E
from .heavenly import HeavenlySpec, lax_fields

PARAM = "t"


class BivectorError(ValueError):
    pass


def pencil_coords(m: int) -> tuple[str, ...]:
    return (
        tuple(f"x{i}" for i in range(1, m + 1))
        + tuple(f"y{i}" for i in range(1, m + 1))
        + tuple(f"p{i}" for i in range(1, m + 1))
    )


@dataclass(frozen=True)
class Bivector:
    """Antisymmetric matrix P^{ab}; entries may contain the pencil parameter ``t``."""

    coords: tuple[str, ...]
    P: tuple[tuple[E.Expr, ...], ...]

    def __post_init__(self):
        n = len(self.coords)
        if len(self.P) != n or any(len(r) != n for r in self.P):
            raise BivectorError("bivector matrix has the wrong shape")
        if PARAM in self.coords:
            raise BivectorError(f"{PARAM!r} is reserved for the pencil parameter")
        for a in range(n):
            for b in range(a, n):
                if E.sub(self.P[a][b], E.neg(self.P[b][a])) != E.ZERO and not _is_zero(
                    E.add(self.P[a][b], self.P[b][a])
                ):
                    raise BivectorError(f"P is not antisymmetric at ({a}, {b})")

    @property
    def n(self) -> int:
        return len(self.coords)

    def at(self, t) -> "Bivector":
        """Specialize the pencil parameter."""
        tv = E.as_expr(t)
        return Bivector(self.coords, tuple(tuple(E.substitute(e, {PARAM: tv}) for e in r) for r in self.P))

    def evaluate(self, p: Mapping[str, object], t=None) -> np.ndarray:
        point = dict(p)
        if t is not None:
            point[PARAM] = t
        ev = E.Evaluator(point)
        return np.array([[float(ev(e)) for e in r] for r in self.P])


def _is_zero(e: E.Expr) -> bool:
    from .sampling import is_identically_zero

    return is_identically_zero(e)


def pencil(spec: HeavenlySpec) -> Bivector:
    """P(t) = sum_i L_i(t) ^ d_{p_i} on (x, y, p), with u ^ v = u (x) v - v (x) u."""
    m = spec.m
    coords = pencil_coords(m)
    n = 3 * m
    L = lax_fields(spec, E.Var(PARAM))
    P = [[E.ZERO] * n for _ in range(n)]
    for i in range(m):
        pi = 2 * m + i
        for a in range(2 * m):
            c = L[i][a]
            P[a][pi] = E.add(P[a][pi], c)
            P[pi][a] = E.sub(P[pi][a], c)
    return Bivector(coords, tuple(tuple(r) for r in P))


Trivector = dict[tuple[int, int, int], E.Expr]


def schouten_bracket(P: Bivector, Q: Bivector) -> Trivector:
    """[P,Q]^{abc} for a < b < c (0-based), other orderings by antisymmetry.

    [P,Q]^{abc} = sum_d (P^{da} d_d Q^{bc} + Q^{da} d_d P^{bc}) + cyclic(a,b,c).
    Constant bivectors bracket to zero and [P,P] = -2 Jac, where Jac is the
    Jacobiator of {x^a, x^b} = P^{ab}.
    """
    if P.coords != Q.coords:
        raise BivectorError("bivectors live on different coordinate systems")
    n = P.n
    c = P.coords
    dP = [[[E.differentiate(P.P[a][b], c[d]) for d in range(n)] for b in range(n)] for a in range(n)]
    dQ = dP if Q is P else [[[E.differentiate(Q.P[a][b], c[d]) for d in range(n)] for b in range(n)] for a in range(n)]

    def part(a, b, cc):
        terms = []
        for d in range(n):
            if not E.is_const(P.P[d][a], 0) and not E.is_const(dQ[b][cc][d], 0):
                terms.append(E.mul(P.P[d][a], dQ[b][cc][d]))
            if not E.is_const(Q.P[d][a], 0) and not E.is_const(dP[b][cc][d], 0):
                terms.append(E.mul(Q.P[d][a], dP[b][cc][d]))
        return terms

    out: Trivector = {}
    for a in range(n):
        for b in range(a + 1, n):
            for cc in range(b + 1, n):
                out[(a, b, cc)] = E.sum_exprs(part(a, b, cc) + part(b, cc, a) + part(cc, a, b))
    return out


def trivector_component(T: Trivector, a: int, b: int, c: int) -> E.Expr:
    """Component for any index order, signed by the sorting permutation."""
    idx = [a, b, c]
    if len(set(idx)) < 3:
        return E.ZERO
    sign = 1
    for i in range(3):
        for j in range(i + 1, 3):
            if idx[i] > idx[j]:
                sign = -sign
    e = T[tuple(sorted(idx))]
    return e if sign > 0 else E.neg(e)


def trivector_max_abs(T: Trivector, points: Sequence[Mapping[str, object]], extra: Mapping[str, object] | None = None) -> float:
    live = [e for e in T.values() if not E.is_const(e, 0)]
    worst = 0.0
    for p in points:
        q = dict(p)
        if extra:
            q.update(extra)
        ev = E.Evaluator(q)
        for e in live:
            worst = max(worst, abs(float(ev(e))))
    return worst


def nonzero_witness(T: Trivector, points: Sequence[Mapping[str, object]], tol: float = 1e-9):
    """First (indices, point, value) with |[P,Q]^{abc}| > tol, or None."""
    for p in points:
        ev = E.Evaluator(p)
        for k, e in T.items():
            if E.is_const(e, 0):
                continue
            v = float(ev(e))
            if abs(v) > tol:
                return k, dict(p), v
    return None


def jacobi_spot_check(P: Bivector, p: Mapping[str, object], h: float = 1e-4) -> tuple[np.ndarray, np.ndarray]:
    """Jacobiator of the coordinate brackets at ``p`` by central differences.

    Returns (Jac, [P,P]) as float arrays over all index triples; the two agree
    through [P,P] = -2 Jac.  Only evaluation of P itself is used for Jac, so the
    check is independent of the symbolic bracket code.
    """
    n = P.n
    coords = P.coords

    def Pnum(q):
        ev = E.Evaluator(q)
        return np.array([[float(ev(e)) for e in r] for r in P.P])

    base = {k: float(v) for k, v in p.items()}
    P0 = Pnum(base)
    grad = np.zeros((n, n, n))  # grad[d][b][c] = d_d P^{bc}
    for d in range(n):
        qp, qm = dict(base), dict(base)
        qp[coords[d]] += h
        qm[coords[d]] -= h
        grad[d] = (Pnum(qp) - Pnum(qm)) / (2 * h)
    # {x^a, {x^b, x^c}} = P^{ad} d_d P^{bc}
    inner = np.einsum("ad,dbc->abc", P0, grad)
    jac = inner + np.transpose(inner, (1, 2, 0)) + np.transpose(inner, (2, 0, 1))
    T = schouten_bracket(P, P)
    ev = E.Evaluator(base)
    S = np.zeros((n, n, n))
    for a in range(n):
        for b in range(n):
            for c in range(n):
                S[a, b, c] = float(ev(trivector_component(T, a, b, c)))
    return jac, S


def kronecker_rank(P: Bivector, t, p: Mapping[str, object], tol: float = 1e-9) -> int:
    """Numerical rank of P(t) at ``p``."""
    try:
        M = P.evaluate(p, t)
    except E.EvaluationError as exc:
        raise BivectorError(f"cannot evaluate P at {dict(p)}: {exc}") from exc
    return int(np.linalg.matrix_rank(M, tol=tol))


def random_pencil_points(m: int, n: int, seed: int = 0) -> list[dict[str, float]]:
    rng = random.Random(seed)
    return [{v: rng.uniform(-1.0, 1.0) for v in pencil_coords(m)} for _ in range(n)]
