"""Seeded sample points and residual norms over them."""

from __future__ import annotations

import random
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from . import expr as E
from .poly import try_poly


def coords(m: int) -> tuple[str, ...]:
    return tuple(f"x{i}" for i in range(1, m + 1)) + tuple(f"y{i}" for i in range(1, m + 1))


def xs(m: int) -> tuple[str, ...]:
    return tuple(f"x{i}" for i in range(1, m + 1))


def ys(m: int) -> tuple[str, ...]:
    return tuple(f"y{i}" for i in range(1, m + 1))


def random_points(
    names: Sequence[str],
    n: int,
    seed: int | random.Random = 0,
    exact: bool = False,
    radius: float = 1.0,
    avoid: Iterable[E.Expr] = (),
    max_tries: int = 1000,
) -> list[dict[str, object]]:
    """``n`` points in [-radius, radius]^k.

    With ``exact`` the coordinates are rationals with denominators up to 16.
    Points where any expression in ``avoid`` evaluates to (near) zero, or fails
    to evaluate, are rejected.
    """
    rng = seed if isinstance(seed, random.Random) else random.Random(seed)
    avoid = list(avoid)
    out: list[dict[str, object]] = []
    tries = 0
    while len(out) < n:
        tries += 1
        if tries > max_tries:
            raise RuntimeError("could not find enough sample points off the singular locus")
        if exact:
            p = {v: Fraction(rng.randint(-16, 16), rng.randint(1, 16)) * Fraction(radius).limit_denominator(64) for v in names}
        else:
            p = {v: rng.uniform(-radius, radius) for v in names}
        ok = True
        for a in avoid:
            try:
                val = E.evaluate(a, p)
            except E.EvaluationError:
                ok = False
                break
            if abs(float(val)) < 1e-3:
                ok = False
                break
        if ok:
            out.append(p)
    return out


def max_abs(exprs: Iterable[E.Expr], points: Sequence[Mapping[str, object]]) -> float:
    exprs = [e for e in exprs if not E.is_const(e, 0)]
    if not exprs:
        return 0.0
    worst = 0.0
    for p in points:
        ev = E.Evaluator(p)
        for e in exprs:
            worst = max(worst, abs(float(ev(e))))
    return worst


def max_abs_exact(exprs: Iterable[E.Expr], points: Sequence[Mapping[str, object]]) -> Fraction:
    worst = Fraction(0)
    for p in points:
        ev = E.Evaluator(p)
        for e in exprs:
            v = ev(e)
            if isinstance(v, float):
                raise TypeError("expression evaluates to a float; use max_abs")
            worst = max(worst, abs(v))
    return worst


def is_identically_zero(e: E.Expr, variables: Sequence[str] | None = None, seed: int = 12345) -> bool:
    """Decide whether ``e`` vanishes identically.

    Exact for polynomials (canonical expansion).  Rational functions are
    evaluated exactly at random rational points; expressions with
    transcendental nodes are checked in floating point to 1e-9.
    """
    if E.is_const(e):
        return e.value == 0
    variables = tuple(sorted(e.free_vars())) if variables is None else tuple(variables)
    p = try_poly(e, variables)
    if p is not None:
        return p.is_zero()
    names = sorted(e.free_vars())
    exact = not E.has_transcendental(e)
    rng = random.Random(seed)
    hits = 0
    tries = 0
    while hits < 8 and tries < 100:
        tries += 1
        pt = random_points(names, 1, rng, exact=exact)[0]
        try:
            v = E.evaluate(e, pt)
        except E.EvaluationError:
            continue
        hits += 1
        if exact and v != 0:
            return False
        if not exact and abs(v) > 1e-9:
            return False
    return hits > 0
