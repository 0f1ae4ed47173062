"""3-webs on R^{2m} in adapted coordinates.

The leaves of the three foliations are {x = const}, {y = const} and
{w = const}.  ``chern_connection`` uses the closed-form Christoffel symbols of
adapted coordinates; ``chern_from_frames`` is an independent implementation
working from arbitrary frames of the three foliations and the bracket formula
for the Chern connection.  The two are cross-checked in the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from . import expr as E
from .exterior import ExprForm, ExprMatrix, det_and_adjugate, exterior_derivative, inverse
from .sampling import coords as coord_names
from .sampling import random_points, xs, ys

Vector = tuple[E.Expr, ...]


class WebError(ValueError):
    pass


@dataclass(frozen=True)
class WebSpec:
    m: int
    w: tuple[E.Expr, ...]
    samples: tuple[Mapping[str, object], ...] = ()

    def __post_init__(self):
        if len(self.w) != self.m:
            raise WebError(f"web needs m={self.m} functions w, got {len(self.w)}")
        allowed = set(self.coords)
        for i, wi in enumerate(self.w):
            extra = wi.free_vars() - allowed
            if extra:
                raise WebError(f"w[{i}] uses undeclared variables {sorted(extra)}")

    @classmethod
    def from_strings(cls, w: Sequence[str], samples: Sequence[Sequence] = ()) -> "WebSpec":
        m = len(w)
        names = coord_names(m)
        exprs = tuple(E.parse(s, names) for s in w)
        pts = tuple({n: Fraction(v) if not isinstance(v, float) else v for n, v in zip(names, row)} for row in samples)
        return cls(m, exprs, pts)

    @property
    def coords(self) -> tuple[str, ...]:
        return coord_names(self.m)

    @property
    def x(self) -> tuple[str, ...]:
        return xs(self.m)

    @property
    def y(self) -> tuple[str, ...]:
        return ys(self.m)

    def sample_points(self, n: int = 10, seed: int = 0, exact: bool = False) -> list[dict]:
        if self.samples:
            return [dict(p) for p in self.samples]
        mats = web_matrices(self, check=False)
        return random_points(self.coords, n, seed, exact=exact, avoid=[mats.det_x, mats.det_y])


@dataclass(frozen=True)
class WebMatrices:
    W_x: ExprMatrix
    W_y: ExprMatrix
    C: ExprMatrix
    Cinv: ExprMatrix
    det_x: E.Expr
    det_y: E.Expr


def web_matrices(spec: WebSpec, check: bool = True) -> WebMatrices:
    """Jacobians W_x, W_y (row i = w_i) and C = W_x W_y^{-1}."""
    W_x = ExprMatrix([[E.differentiate(wi, v) for v in spec.x] for wi in spec.w])
    W_y = ExprMatrix([[E.differentiate(wi, v) for v in spec.y] for wi in spec.w])
    det_x, _ = det_and_adjugate(W_x)
    det_y, adj_y = det_and_adjugate(W_y)
    if check:
        for p in spec.samples:
            for name, d in (("W_x", det_x), ("W_y", det_y)):
                if E.evaluate(d, p) == 0:
                    raise WebError(f"{name} is singular at sample point {p}")
    Wy_inv = adj_y.map(lambda e: E.div(e, det_y))
    C = W_x @ Wy_inv
    det_adj_x = det_and_adjugate(W_x)[1]
    # C^{-1} = W_y W_x^{-1}
    Cinv = W_y @ det_adj_x.map(lambda e: E.div(e, det_x))
    return WebMatrices(W_x, W_y, C, Cinv, det_x, det_y)


@dataclass(frozen=True)
class ConnectionData:
    """Chern connection of a web in adapted coordinates.

    ``gamma[a][b][c]`` is the coefficient of the c-th coordinate field in
    nabla_{d_a} d_b, with coordinates ordered x1..xm, y1..ym.  ``C`` is the
    matrix entering the closed-form Christoffel symbols:
    ``C[j][s]`` = (W_y^{-1} W_x)[s][j], i.e. W_x W_y^{-1} built from the
    transposed Jacobians.  It has the same determinant as ``W_x W_y^{-1}``.
    """

    m: int
    coords: tuple[str, ...]
    gamma_xx: tuple
    gamma_yy: tuple
    gamma: tuple
    C: ExprMatrix
    Cinv: ExprMatrix
    det_C: E.Expr
    torsion: tuple
    _riemann: dict = field(default_factory=dict, repr=False, compare=False)

    def riemann(self) -> tuple:
        """R(d_a, d_b) d_c = sum_d riem[a][b][c][d] d_d."""
        if "r" not in self._riemann:
            self._riemann["r"] = _riemann(self.gamma, self.coords)
        return self._riemann["r"]

    def ricci(self) -> tuple:
        """Ric(d_b, d_c) = trace of X -> R(X, d_b) d_c."""
        if "ric" not in self._riemann:
            riem = self.riemann()
            n = len(self.coords)
            self._riemann["ric"] = tuple(
                tuple(E.sum_exprs(riem[a][b][c][a] for a in range(n)) for c in range(n)) for b in range(n)
            )
        return self._riemann["ric"]

    def christoffel_at(self, p: Mapping[str, object]) -> np.ndarray:
        ev = E.Evaluator(p)
        n = len(self.coords)
        return np.array([[[float(ev(self.gamma[a][b][c])) for c in range(n)] for b in range(n)] for a in range(n)])


def _chern_matrix(spec: WebSpec, mats: WebMatrices) -> tuple[ExprMatrix, ExprMatrix]:
    det_y, adj_y = det_and_adjugate(mats.W_y)
    det_x, adj_x = det_and_adjugate(mats.W_x)
    D = (adj_y @ mats.W_x).map(lambda e: E.div(e, det_y))  # W_y^{-1} W_x
    Dinv = (adj_x @ mats.W_y).map(lambda e: E.div(e, det_x))  # W_x^{-1} W_y
    return D.transpose(), Dinv.transpose()


def chern_connection(spec: WebSpec, check: bool = True) -> ConnectionData:
    mats = web_matrices(spec, check=check)
    m = spec.m
    K, Kinv = _chern_matrix(spec, mats)
    xv, yv = spec.x, spec.y
    gxx = tuple(
        tuple(
            tuple(E.sum_exprs(E.mul(E.differentiate(K[j, s], xv[i]), Kinv[s, t]) for s in range(m)) for t in range(m))
            for j in range(m)
        )
        for i in range(m)
    )
    gyy = tuple(
        tuple(
            tuple(
                E.neg(E.sum_exprs(E.mul(Kinv[j, s], E.differentiate(K[s, t], yv[i])) for s in range(m)))
                for t in range(m)
            )
            for j in range(m)
        )
        for i in range(m)
    )
    n = 2 * m
    gamma = [[[E.ZERO] * n for _ in range(n)] for _ in range(n)]
    for i in range(m):
        for j in range(m):
            for t in range(m):
                gamma[i][j][t] = gxx[i][j][t]
                gamma[m + i][m + j][m + t] = gyy[i][j][t]
    gamma_t = tuple(tuple(tuple(r) for r in g) for g in gamma)
    torsion = tuple(
        tuple(tuple(E.sub(gamma[a][b][c], gamma[b][a][c]) for c in range(n)) for b in range(n)) for a in range(n)
    )
    det_C = E.div(mats.det_x, mats.det_y)
    data = ConnectionData(m, spec.coords, gxx, gyy, gamma_t, K, Kinv, det_C, torsion)
    if check:
        _assert_parallel(spec, data, mats)
    return data


def third_foliation_frame(spec: WebSpec, mats: WebMatrices | None = None) -> list[Vector]:
    """Frame of ker dw: d_{x_k} - sum_l (W_y^{-1} W_x)[l][k] d_{y_l}."""
    mats = mats or web_matrices(spec, check=False)
    det_y, adj_y = det_and_adjugate(mats.W_y)
    D = (adj_y @ mats.W_x).map(lambda e: E.div(e, det_y))
    m = spec.m
    frame = []
    for k in range(m):
        vec = [E.ONE if i == k else E.ZERO for i in range(m)] + [E.neg(D[l, k]) for l in range(m)]
        frame.append(tuple(vec))
    return frame


def covariant_derivative(gamma, coords: Sequence[str], X: Vector, Y: Vector) -> Vector:
    n = len(coords)
    out = []
    for c in range(n):
        terms = []
        for a in range(n):
            if E.is_const(X[a], 0):
                continue
            terms.append(E.mul(X[a], E.differentiate(Y[c], coords[a])))
            for b in range(n):
                if not E.is_const(Y[b], 0):
                    terms.append(E.mul(E.mul(X[a], Y[b]), gamma[a][b][c]))
        out.append(E.sum_exprs(terms))
    return tuple(out)


def _assert_parallel(spec: WebSpec, data: ConnectionData, mats: WebMatrices) -> None:
    """(C1) for the third foliation at the declared sample points."""
    if not spec.samples:
        return
    frame = third_foliation_frame(spec, mats)
    n = 2 * spec.m
    dw = [[E.differentiate(wi, v) for v in spec.coords] for wi in spec.w]
    for p in spec.samples:
        ev = E.Evaluator(p)
        for a in range(n):
            Z = tuple(E.ONE if i == a else E.ZERO for i in range(n))
            for V in frame:
                nv = covariant_derivative(data.gamma, spec.coords, Z, V)
                for row in dw:
                    val = sum(float(ev(row[c])) * float(ev(nv[c])) for c in range(n))
                    if abs(val) > 1e-8:
                        raise WebError("Chern connection does not preserve the third foliation")


def _riemann(gamma, coords: Sequence[str]) -> tuple:
    n = len(coords)
    out = []
    for a in range(n):
        ra = []
        for b in range(n):
            rb = []
            for c in range(n):
                rc = []
                for d in range(n):
                    if a == b:
                        rc.append(E.ZERO)
                        continue
                    terms = [
                        E.differentiate(gamma[b][c][d], coords[a]),
                        E.neg(E.differentiate(gamma[a][c][d], coords[b])),
                    ]
                    for e in range(n):
                        terms.append(E.mul(gamma[b][c][e], gamma[a][e][d]))
                        terms.append(E.neg(E.mul(gamma[a][c][e], gamma[b][e][d])))
                    rc.append(E.sum_exprs(terms))
                rb.append(tuple(rc))
            ra.append(tuple(rb))
        out.append(tuple(ra))
    return tuple(out)


def torsion_and_hirota(spec: WebSpec, with_hirota: bool = True) -> tuple[tuple, list[E.Expr] | None]:
    """Torsion tensor T[a][b][c] and, for m = 2, the Hirota residuals.

    Hirota residual i is LHS - RHS of the torsion-free condition in adapted
    coordinates.  Requesting it for m != 2 is an error.
    """
    data = chern_connection(spec, check=False)
    if not with_hirota:
        return data.torsion, None
    return data.torsion, hirota_residuals(spec)


def hirota_residuals(spec: WebSpec) -> list[E.Expr]:
    if spec.m != 2:
        raise WebError("the Hirota residual is only defined for m = 2")
    mats = web_matrices(spec, check=False)
    dX, dY = mats.det_x, mats.det_y
    d = E.differentiate
    out = []
    for wi in spec.w:
        lhs = E.sub(E.mul(d(wi, "x1"), d(dY, "x2")), E.mul(d(wi, "x2"), d(dY, "x1")))
        rhs = E.sub(E.mul(d(wi, "y1"), d(dX, "y2")), E.mul(d(wi, "y2"), d(dX, "y1")))
        out.append(E.sub(lhs, rhs))
    return out


@dataclass(frozen=True)
class CurvatureData:
    riemann: tuple
    ricci: tuple
    ricci_closed: tuple  # R_ij = Ric(d_{x_i}, d_{y_j}) from the closed form


def curvature(spec: WebSpec, data: ConnectionData | None = None) -> CurvatureData:
    data = data or chern_connection(spec, check=False)
    m = spec.m
    dC = data.det_C
    closed = tuple(
        tuple(
            E.differentiate(E.div(E.differentiate(dC, spec.x[i]), dC), spec.y[j])
            for j in range(m)
        )
        for i in range(m)
    )
    return CurvatureData(data.riemann(), data.ricci(), closed)


def ricci_closed_full(spec: WebSpec, closed) -> tuple:
    """Block matrix [[0, R], [-R^T, 0]] in the (d_x, d_y) basis."""
    m = spec.m
    n = 2 * m
    out = [[E.ZERO] * n for _ in range(n)]
    for i in range(m):
        for j in range(m):
            out[i][m + j] = closed[i][j]
            out[m + j][i] = E.neg(closed[i][j])
    return tuple(tuple(r) for r in out)


@dataclass(frozen=True)
class ConformalData:
    omega1: tuple[ExprForm, ...]  # d_x w_i
    omega2: tuple[ExprForm, ...]  # d_y w_i
    metric: tuple  # symmetric 2m x 2m coefficient matrix of g
    weyl: ExprForm  # omega with nabla g = omega (x) g
    lee: ExprForm
    dlee: ExprForm
    torsion_free: bool | None
    hyper_kahler: bool | None  # None when the structure has torsion


def symmetric_product(a: ExprForm, b: ExprForm) -> list[list[E.Expr]]:
    """Coefficient matrix of a.b = (a (x) b + b (x) a) / 2."""
    n = len(a.basis)
    ca = [a.coeffs.get((i,), E.ZERO) for i in range(n)]
    cb = [b.coeffs.get((i,), E.ZERO) for i in range(n)]
    half = E.Const(Fraction(1, 2))
    return [[E.mul(half, E.add(E.mul(ca[i], cb[j]), E.mul(cb[i], ca[j]))) for j in range(n)] for i in range(n)]


def conformal_data(spec: WebSpec, points: Sequence[Mapping] | None = None, tol: float = 1e-9) -> ConformalData:
    if spec.m != 2:
        raise WebError("conformal data is only defined for m = 2")
    basis = spec.coords
    mats = web_matrices(spec, check=False)
    om1 = tuple(exterior_derivative(ExprForm.function(basis, wi), "x") for wi in spec.w)
    om2 = tuple(exterior_derivative(ExprForm.function(basis, wi), "y") for wi in spec.w)
    g1 = symmetric_product(om1[0], om2[1])
    g2 = symmetric_product(om1[1], om2[0])
    n = len(basis)
    metric = tuple(tuple(E.sub(g1[i][j], g2[i][j]) for j in range(n)) for i in range(n))
    lee = exterior_derivative(ExprForm.function(basis, mats.det_y), "x").scale(E.div(E.ONE, mats.det_y)) + exterior_derivative(
        ExprForm.function(basis, mats.det_x), "y"
    ).scale(E.div(E.ONE, mats.det_x))
    dlee = exterior_derivative(lee, "full")
    pts = list(points) if points is not None else spec.sample_points(10, seed=7)
    tors = torsion_and_hirota(spec, with_hirota=False)[0]
    torsion_free = _vanishes_at([c for a in tors for b in a for c in b], pts, tol)
    hk = None
    if torsion_free:
        hk = _vanishes_at(list(dlee.coeffs.values()), pts, tol)
    return ConformalData(om1, om2, metric, lee, lee, dlee, torsion_free, hk)


def _vanishes_at(exprs: Sequence[E.Expr], pts: Sequence[Mapping], tol: float) -> bool:
    exprs = [e for e in exprs if not E.is_const(e, 0)]
    for p in pts:
        ev = E.Evaluator(p)
        for e in exprs:
            v = ev(e)
            if isinstance(v, Fraction):
                if v != 0:
                    return False
            elif abs(v) >= tol:
                return False
    return True


def metric_derivative_defect(spec: WebSpec, conf: ConformalData, data: ConnectionData | None = None) -> tuple:
    """Components of nabla g - omega (x) g, indexed [a][b][c] = (nabla_a g)_{bc} - omega_a g_{bc}."""
    data = data or chern_connection(spec, check=False)
    g = conf.metric
    G = data.gamma
    names = spec.coords
    n = len(names)
    om = [conf.weyl.coeffs.get((a,), E.ZERO) for a in range(n)]
    out = []
    for a in range(n):
        ra = []
        for b in range(n):
            rb = []
            for c in range(n):
                terms = [E.differentiate(g[b][c], names[a])]
                for d in range(n):
                    terms.append(E.neg(E.mul(G[a][b][d], g[d][c])))
                    terms.append(E.neg(E.mul(G[a][c][d], g[b][d])))
                terms.append(E.neg(E.mul(om[a], g[b][c])))
                rb.append(E.sum_exprs(terms))
            ra.append(tuple(rb))
        out.append(tuple(ra))
    return tuple(out)


# ---------------------------------------------------------------------------
# frame-based Chern connection


@dataclass(frozen=True)
class FrameTriple:
    """Frames of TF_1, TF_2, TF_3; each frame is a list of m coordinate vectors."""

    m: int
    coords: tuple[str, ...]
    f1: tuple[Vector, ...]
    f2: tuple[Vector, ...]
    f3: tuple[Vector, ...]

    @classmethod
    def from_web(cls, spec: WebSpec) -> "FrameTriple":
        m = spec.m
        n = 2 * m
        unit = lambda k: tuple(E.ONE if i == k else E.ZERO for i in range(n))  # noqa: E731
        f1 = tuple(unit(m + i) for i in range(m))  # leaves {x = const}
        f2 = tuple(unit(i) for i in range(m))  # leaves {y = const}
        f3 = tuple(third_foliation_frame(spec))
        return cls(m, spec.coords, f1, f2, f3)

    def rescaled(self, which: int, k: int, factor: E.Expr) -> "FrameTriple":
        frames = [list(self.f1), list(self.f2), list(self.f3)]
        frames[which][k] = tuple(E.mul(factor, c) for c in frames[which][k])
        return FrameTriple(self.m, self.coords, *(tuple(f) for f in frames))


def _matvec(M: ExprMatrix, v: Vector) -> Vector:
    return tuple(E.sum_exprs(E.mul(M[i, j], v[j]) for j in range(M.cols) if not E.is_const(v[j], 0)) for i in range(M.rows))


def bracket(coords: Sequence[str], U: Vector, V: Vector) -> Vector:
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


def _block_inverse(mat: list[list[E.Expr]]) -> ExprMatrix:
    M = ExprMatrix(mat)
    if M.rows <= 4:
        return inverse(M)
    # larger frames: Gauss-Jordan over expressions
    n = M.rows
    A = [list(r) + [E.ONE if i == j else E.ZERO for j in range(n)] for i, r in enumerate(mat)]
    for col in range(n):
        piv = next((r for r in range(col, n) if not E.is_const(A[r][col], 0)), None)
        if piv is None:
            raise WebError("frames are not transversal")
        A[col], A[piv] = A[piv], A[col]
        p = A[col][col]
        A[col] = [E.div(x, p) for x in A[col]]
        for r in range(n):
            if r != col and not E.is_const(A[r][col], 0):
                f = A[r][col]
                A[r] = [E.sub(x, E.mul(f, y)) for x, y in zip(A[r], A[col])]
    return ExprMatrix([row[n:] for row in A])


class FrameConnection:
    """Chern connection of a 3-web given by frames, via the bracket formula."""

    def __init__(self, ft: FrameTriple):
        self.ft = ft
        m, n = ft.m, 2 * ft.m
        # columns: F1 frame then F2 frame
        M = [[(ft.f1 + ft.f2)[k][i] for k in range(n)] for i in range(n)]
        Minv = _block_inverse(M)
        self.M = ExprMatrix(M)
        self.Minv = Minv
        sel_v = ExprMatrix([[E.ONE if (i == j and i < m) else E.ZERO for j in range(n)] for i in range(n)])
        sel_h = ExprMatrix([[E.ONE if (i == j and i >= m) else E.ZERO for j in range(n)] for i in range(n)])
        self.Pv = self.M @ sel_v @ Minv  # onto TF_1 along TF_2
        self.Ph = self.M @ sel_h @ Minv  # onto TF_2 along TF_1
        # frame coefficients of the F3 vectors: z_k = a_k + b_k
        coeffs = [_matvec(Minv, z) for z in ft.f3]
        A = ExprMatrix([[coeffs[k][i] for k in range(m)] for i in range(m)])
        B = ExprMatrix([[coeffs[k][m + i] for k in range(m)] for i in range(m)])
        Ainv = _block_inverse([list(r) for r in A.entries])
        Binv = _block_inverse([list(r) for r in B.entries])
        top = A @ Binv  # TF_2 coefficients -> TF_1 coefficients (up to sign)
        bot = B @ Ainv
        Jf = [[E.ZERO] * n for _ in range(n)]
        for i in range(m):
            for j in range(m):
                Jf[i][m + j] = E.neg(top[i, j])
                Jf[m + i][j] = E.neg(bot[i, j])
        self.J = self.M @ ExprMatrix(Jf) @ Minv

    def nabla(self, X: Vector, Y: Vector) -> Vector:
        c = self.ft.coords
        Ph, Pv, J = self.Ph, self.Pv, self.J
        hX, vX = _matvec(Ph, X), _matvec(Pv, X)
        hY, vY = _matvec(Ph, Y), _matvec(Pv, Y)
        t1 = _matvec(J, bracket(c, hX, _matvec(J, hY)))
        t1 = tuple(E.add(a, b) for a, b in zip(t1, bracket(c, vX, hY)))
        t2 = _matvec(J, bracket(c, vX, _matvec(J, vY)))
        t2 = tuple(E.add(a, b) for a, b in zip(t2, bracket(c, hX, vY)))
        return tuple(E.add(a, b) for a, b in zip(_matvec(Ph, t1), _matvec(Pv, t2)))

    def christoffel(self) -> tuple:
        n = len(self.ft.coords)
        unit = lambda k: tuple(E.ONE if i == k else E.ZERO for i in range(n))  # noqa: E731
        return tuple(tuple(self.nabla(unit(a), unit(b)) for b in range(n)) for a in range(n))

    def torsion(self) -> tuple:
        G = self.christoffel()
        n = len(self.ft.coords)
        return tuple(tuple(tuple(E.sub(G[a][b][c], G[b][a][c]) for c in range(n)) for b in range(n)) for a in range(n))


def chern_from_frames(ft: FrameTriple, p: Mapping[str, object]) -> np.ndarray:
    """Christoffel array Gamma[a][b][c] of the frame-defined Chern connection at ``p``."""
    conn = FrameConnection(ft)
    ev = E.Evaluator(p)
    det = det_and_adjugate(conn.M)[0] if conn.M.rows <= 4 else None
    if det is not None and ev(det) == 0:
        raise WebError(f"frames of F1 and F2 are not transversal at {p}")
    G = conn.christoffel()
    n = len(ft.coords)
    return np.array([[[float(ev(G[a][b][c])) for c in range(n)] for b in range(n)] for a in range(n)])
