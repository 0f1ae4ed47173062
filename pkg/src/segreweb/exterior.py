"""Dense Expr matrices and differential forms on coordinate charts of R^{2m}.

Forms use the global differential order dx1 < ... < dxm < dy1 < ... < dym
(more generally: the order of the ``basis`` tuple).  A coefficient is stored
under the strictly increasing tuple of basis positions.
"""

from __future__ import annotations

from typing import Callable, Iterable, Mapping, Sequence

from . import expr as E


class ExprMatrix:
    __slots__ = ("rows", "cols", "entries")

    def __init__(self, entries: Sequence[Sequence[E.Expr]]):
        entries = tuple(tuple(E.as_expr(x) for x in row) for row in entries)
        if not entries:
            raise ValueError("empty matrix")
        width = len(entries[0])
        if any(len(r) != width for r in entries):
            raise ValueError("ragged matrix")
        self.rows = len(entries)
        self.cols = width
        self.entries = entries

    @classmethod
    def identity(cls, n: int) -> "ExprMatrix":
        return cls([[E.ONE if i == j else E.ZERO for j in range(n)] for i in range(n)])

    @classmethod
    def zeros(cls, r: int, c: int) -> "ExprMatrix":
        return cls([[E.ZERO] * c for _ in range(r)])

    def __getitem__(self, ij: tuple[int, int]) -> E.Expr:
        i, j = ij
        return self.entries[i][j]

    def __eq__(self, other: object) -> bool:
        return isinstance(other, ExprMatrix) and self.entries == other.entries

    def __hash__(self):
        return hash(self.entries)

    def __repr__(self) -> str:
        body = "; ".join(", ".join(str(x) for x in row) for row in self.entries)
        return f"ExprMatrix([{body}])"

    def map(self, f: Callable[[E.Expr], E.Expr]) -> "ExprMatrix":
        return ExprMatrix([[f(x) for x in row] for row in self.entries])

    def transpose(self) -> "ExprMatrix":
        return ExprMatrix([[self.entries[i][j] for i in range(self.rows)] for j in range(self.cols)])

    def __add__(self, other: "ExprMatrix") -> "ExprMatrix":
        return ExprMatrix([[a + b for a, b in zip(r1, r2)] for r1, r2 in zip(self.entries, other.entries)])

    def __sub__(self, other: "ExprMatrix") -> "ExprMatrix":
        return ExprMatrix([[a - b for a, b in zip(r1, r2)] for r1, r2 in zip(self.entries, other.entries)])

    def __neg__(self) -> "ExprMatrix":
        return self.map(E.neg)

    def scale(self, c) -> "ExprMatrix":
        c = E.as_expr(c)
        return self.map(lambda x: E.mul(c, x))

    def __matmul__(self, other: "ExprMatrix") -> "ExprMatrix":
        if self.cols != other.rows:
            raise ValueError("shape mismatch in matrix product")
        return ExprMatrix(
            [
                [E.sum_exprs(E.mul(self.entries[i][k], other.entries[k][j]) for k in range(self.cols)) for j in range(other.cols)]
                for i in range(self.rows)
            ]
        )

    def trace(self) -> E.Expr:
        return E.sum_exprs(self.entries[i][i] for i in range(min(self.rows, self.cols)))

    def diff(self, v: str) -> "ExprMatrix":
        return self.map(lambda x: E.differentiate(x, v))

    def evaluate(self, point: Mapping[str, object], ev: E.Evaluator | None = None) -> list[list]:
        ev = ev or E.Evaluator(point)
        return [[ev(x) for x in row] for row in self.entries]


def _det(m: list[list[E.Expr]]) -> E.Expr:
    n = len(m)
    if n == 1:
        return m[0][0]
    if n == 2:
        return E.sub(E.mul(m[0][0], m[1][1]), E.mul(m[0][1], m[1][0]))
    terms = []
    for j in range(n):
        if E.is_const(m[0][j], 0):
            continue
        minor = [row[:j] + row[j + 1 :] for row in m[1:]]
        t = E.mul(m[0][j], _det(minor))
        terms.append(t if j % 2 == 0 else E.neg(t))
    return E.sum_exprs(terms)


def det_and_adjugate(M: ExprMatrix) -> tuple[E.Expr, ExprMatrix]:
    """Symbolic determinant and adjugate by cofactor expansion."""
    if M.rows != M.cols:
        raise ValueError(f"det_and_adjugate needs a square matrix, got {M.rows}x{M.cols}")
    n = M.rows
    if n > 4:
        raise ValueError("det_and_adjugate supports sizes up to 4")
    rows = [list(r) for r in M.entries]
    det = _det(rows)
    if n == 1:
        return det, ExprMatrix([[E.ONE]])
    adj = [[E.ZERO] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            minor = [r[:j] + r[j + 1 :] for k, r in enumerate(rows) if k != i]
            c = _det(minor)
            # adjugate is the transposed cofactor matrix
            adj[j][i] = c if (i + j) % 2 == 0 else E.neg(c)
    return det, ExprMatrix(adj)


def inverse(M: ExprMatrix) -> ExprMatrix:
    det, adj = det_and_adjugate(M)
    return adj.map(lambda x: E.div(x, det))


def determinant(M: ExprMatrix) -> E.Expr:
    return det_and_adjugate(M)[0] if M.rows <= 4 else _det([list(r) for r in M.entries])


# ---------------------------------------------------------------------------
# forms


def _sort_with_sign(idx: Sequence[int]) -> tuple[int, tuple[int, ...]]:
    """Sign of the sorting permutation; 0 when an index repeats."""
    arr = list(idx)
    if len(set(arr)) != len(arr):
        return 0, ()
    sign = 1
    for i in range(len(arr)):
        for j in range(len(arr) - 1 - i):
            if arr[j] > arr[j + 1]:
                arr[j], arr[j + 1] = arr[j + 1], arr[j]
                sign = -sign
    return sign, tuple(arr)


class ExprForm:
    """A k-form sum_I c_I d(basis[I]) with Expr coefficients."""

    __slots__ = ("basis", "degree", "coeffs")

    def __init__(self, basis: Sequence[str], degree: int, coeffs: Mapping[Sequence[int], E.Expr] | None = None):
        self.basis = tuple(basis)
        self.degree = degree
        self.coeffs: dict[tuple[int, ...], E.Expr] = {}
        for idx, c in (coeffs or {}).items():
            if len(idx) != degree:
                raise ValueError(f"multi-index {idx} does not have length {degree}")
            sign, key = _sort_with_sign(idx)
            c = E.as_expr(c)
            if sign == 0 or E.is_const(c, 0):
                continue
            term = c if sign > 0 else E.neg(c)
            prev = self.coeffs.get(key)
            val = term if prev is None else E.add(prev, term)
            if E.is_const(val, 0):
                self.coeffs.pop(key, None)
            else:
                self.coeffs[key] = val

    @classmethod
    def zero(cls, basis: Sequence[str], degree: int) -> "ExprForm":
        return cls(basis, degree)

    @classmethod
    def function(cls, basis: Sequence[str], f) -> "ExprForm":
        return cls(basis, 0, {(): E.as_expr(f)})

    @classmethod
    def differential(cls, basis: Sequence[str], name: str, coeff=1) -> "ExprForm":
        """The 1-form ``coeff * d(name)``."""
        return cls(basis, 1, {(tuple(basis).index(name),): E.as_expr(coeff)})

    @classmethod
    def basis_form(cls, basis: Sequence[str], names: Sequence[str], coeff=1) -> "ExprForm":
        """``coeff * d(names[0]) ^ d(names[1]) ^ ...`` with sign from reordering."""
        b = tuple(basis)
        return cls(b, len(names), {tuple(b.index(n) for n in names): E.as_expr(coeff)})

    def coefficient(self, names: Sequence[str]) -> E.Expr:
        """Coefficient next to ``d(names[0]) ^ ...`` in the given (not necessarily sorted) order."""
        sign, key = _sort_with_sign([self.basis.index(n) for n in names])
        if sign == 0:
            return E.ZERO
        c = self.coeffs.get(key, E.ZERO)
        return c if sign > 0 else E.neg(c)

    def _compatible(self, other: "ExprForm") -> None:
        if self.basis != other.basis:
            raise ValueError("forms over different bases")

    def __add__(self, other: "ExprForm") -> "ExprForm":
        self._compatible(other)
        if self.degree != other.degree:
            raise ValueError("cannot add forms of different degree")
        out = ExprForm(self.basis, self.degree, self.coeffs)
        for k, c in other.coeffs.items():
            v = E.add(out.coeffs.get(k, E.ZERO), c)
            if E.is_const(v, 0):
                out.coeffs.pop(k, None)
            else:
                out.coeffs[k] = v
        return out

    def __neg__(self) -> "ExprForm":
        return ExprForm(self.basis, self.degree, {k: E.neg(c) for k, c in self.coeffs.items()})

    def __sub__(self, other: "ExprForm") -> "ExprForm":
        return self + (-other)

    def scale(self, f) -> "ExprForm":
        f = E.as_expr(f)
        return ExprForm(self.basis, self.degree, {k: E.mul(f, c) for k, c in self.coeffs.items()})

    def map(self, fn: Callable[[E.Expr], E.Expr]) -> "ExprForm":
        return ExprForm(self.basis, self.degree, {k: fn(c) for k, c in self.coeffs.items()})

    def __xor__(self, other: "ExprForm") -> "ExprForm":
        return wedge(self, other)

    def __repr__(self) -> str:
        if not self.coeffs:
            return f"ExprForm(0, degree={self.degree})"
        parts = []
        for k in sorted(self.coeffs):
            dif = "^".join("d" + self.basis[i] for i in k)
            parts.append(f"({self.coeffs[k]})" + (f" {dif}" if dif else ""))
        return "ExprForm(" + " + ".join(parts) + ")"

    def is_syntactically_zero(self) -> bool:
        return not self.coeffs

    def evaluate(self, point: Mapping[str, object]) -> dict[tuple[int, ...], object]:
        ev = E.Evaluator(point)
        return {k: ev(c) for k, c in self.coeffs.items()}


def wedge(a: ExprForm, b: ExprForm) -> ExprForm:
    """Graded-commutative exterior product."""
    a._compatible(b)
    deg = a.degree + b.degree
    if deg > len(a.basis):
        return ExprForm.zero(a.basis, deg)
    coeffs: dict[tuple[int, ...], list[E.Expr]] = {}
    for ka, ca in a.coeffs.items():
        for kb, cb in b.coeffs.items():
            sign, key = _sort_with_sign(ka + kb)
            if sign == 0:
                continue
            t = E.mul(ca, cb)
            coeffs.setdefault(key, []).append(t if sign > 0 else E.neg(t))
    return ExprForm(a.basis, deg, {k: E.sum_exprs(v) for k, v in coeffs.items()})


def exterior_derivative(a: ExprForm, mode: str = "full", directions: Iterable[str] | None = None) -> ExprForm:
    """d, d_x or d_y of a form.

    ``mode`` is ``"full"``, ``"x"`` or ``"y"``; partial modes differentiate only
    along basis names starting with that letter.  ``directions`` overrides the
    choice explicitly.
    """
    if directions is None:
        if mode == "full":
            directions = a.basis
        elif mode in ("x", "d_x"):
            directions = [n for n in a.basis if n.startswith("x")]
        elif mode in ("y", "d_y"):
            directions = [n for n in a.basis if n.startswith("y")]
        else:
            raise ValueError(f"unknown mode {mode!r}")
    directions = list(directions)
    pos = {n: i for i, n in enumerate(a.basis)}
    coeffs: dict[tuple[int, ...], list[E.Expr]] = {}
    for k, c in a.coeffs.items():
        for v in directions:
            dc = E.differentiate(c, v)
            if E.is_const(dc, 0):
                continue
            sign, key = _sort_with_sign((pos[v],) + k)
            if sign == 0:
                continue
            coeffs.setdefault(key, []).append(dc if sign > 0 else E.neg(dc))
    return ExprForm(a.basis, a.degree + 1, {k: E.sum_exprs(v) for k, v in coeffs.items()})


def complement_form(basis: Sequence[str], names: Sequence[str], omit: Iterable[str], coeff=1) -> ExprForm:
    """``coeff * wedge of d(n) for n in names if n not in omit``, in the order of ``names``."""
    omit = set(omit)
    kept = [n for n in names if n not in omit]
    return ExprForm.basis_form(basis, kept, coeff)


def permutation_sign(perm: Sequence[int]) -> int:
    return _sort_with_sign(perm)[0]


__all__ = [
    "ExprMatrix",
    "ExprForm",
    "det_and_adjugate",
    "inverse",
    "determinant",
    "wedge",
    "exterior_derivative",
    "complement_form",
    "permutation_sign",
]
