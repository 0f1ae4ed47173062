"""Command-line front end.  Every subcommand prints one JSON report.

Exit codes: 0 all verdicts pass, 1 some verdict fails, 2 input error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from fractions import Fraction
from typing import Any, Callable, Sequence

from . import biham, heavenly, ode, solver, web
from . import expr as E
from .poly import Poly, try_poly
from .sampling import coords as web_coords
from .sampling import max_abs, random_points


class InputError(Exception):
    pass


# ---------------------------------------------------------------------------
# problem files


def _parse_field(src: Any, field: str, names: Sequence[str]) -> E.Expr:
    if not isinstance(src, str):
        raise InputError(f"{field}: expected an expression string, got {type(src).__name__}")
    try:
        return E.parse(src, names)
    except E.ParseError as exc:
        raise InputError(f"{field}: {exc}") from None


def _exprs(doc: dict, key: str, m: int, names: Sequence[str]) -> tuple[E.Expr, ...]:
    items = doc.get(key)
    if not isinstance(items, list):
        raise InputError(f"{key}: expected a list of {m} expressions")
    if len(items) != m:
        raise InputError(f"{key}: arity mismatch, m = {m} needs {m} expressions, got {len(items)}")
    return tuple(_parse_field(s, f"{key}[{i}]", names) for i, s in enumerate(items))


def _m(doc: dict) -> int:
    m = doc.get("m")
    if not isinstance(m, int) or isinstance(m, bool) or m < 1:
        raise InputError("m: expected a positive integer")
    return m


def problem_from_dict(doc: Any):
    if not isinstance(doc, dict):
        raise InputError("problem file must hold a JSON object")
    kind = doc.get("kind")
    if kind is None:
        raise InputError("kind: missing (expected one of web, heavenly, theta, ode)")
    if kind == "web":
        m = _m(doc)
        w = _exprs(doc, "w", m, web_coords(m))
        samples = []
        for row in doc.get("samples", []):
            if len(row) != 2 * m:
                raise InputError(f"samples: each point needs {2 * m} coordinates")
            samples.append({n: (v if isinstance(v, float) else Fraction(v)) for n, v in zip(web_coords(m), row)})
        try:
            return web.WebSpec(m, w, tuple(samples))
        except web.WebError as exc:
            raise InputError(str(exc)) from None
    if kind == "heavenly":
        m = _m(doc)
        return heavenly.HeavenlySpec(m, _exprs(doc, "R", m, web_coords(m)))
    if kind == "theta":
        m = _m(doc)
        th = doc.get("theta")
        if not isinstance(th, dict):
            raise InputError('theta: expected an object like {"12": "x1^3/6"}')
        for key, src in th.items():
            _parse_field(src, f"theta[{key}]", web_coords(m))
        for key, comps in (doc.get("f") or {}).items():
            for idx, src in comps.items():
                _parse_field(src, f"f[{key}][{idx}]", web_coords(m))
        try:
            return heavenly.ThetaSpec.from_strings(m, th, doc.get("f"))
        except (heavenly.HeavenlyError, ValueError) as exc:
            raise InputError(f"theta: {exc}") from None
    if kind == "ode":
        m = _m(doc)
        spec = ode.OdeSpec(m, _exprs(doc, "F", m, ode.jet_coords(m)))
        return spec
    raise InputError(f"kind: unknown value {kind!r} (expected one of web, heavenly, theta, ode)")


def _read_json(path: str) -> Any:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from None


def load_problem(path: str):
    return problem_from_dict(_read_json(path))


def _expect(spec, cls, command: str):
    if not isinstance(spec, cls):
        raise InputError(f"{command} needs a problem of kind {_KIND[cls]}, got {type(spec).__name__}")
    return spec


_KIND = {web.WebSpec: "web", heavenly.HeavenlySpec: "heavenly", heavenly.ThetaSpec: "theta", ode.OdeSpec: "ode"}


# ---------------------------------------------------------------------------
# helpers


def _num(v) -> Any:
    if isinstance(v, Fraction):
        return int(v) if v.denominator == 1 else str(v)
    return v


def _pretty(e: E.Expr, names: Sequence[str]) -> str:
    p = try_poly(e, names)
    return p.to_string() if p is not None else E.to_string(e)


def _matrix_label(M, names: Sequence[str]) -> Any:
    n = M.rows
    strings = [[_pretty(M[i, j], names) for j in range(n)] for i in range(n)]
    if all(strings[i][j] == ("1" if i == j else "0") for i in range(n) for j in range(n)):
        return "identity"
    if all(s == "0" for r in strings for s in r):
        return 0
    return strings


def _points(names: Sequence[str], args, avoid=()) -> list[dict]:
    return random_points(names, args.points, args.seed, avoid=avoid)


def _base(args, command: str) -> dict:
    rep = {"command": command, "spec": args.spec, "tol": args.tol, "seed": args.seed, "points": args.points}
    return rep


def _t_samples(args) -> list[Fraction]:
    try:
        return [Fraction(s) for s in args.t_samples.split(",") if s.strip()]
    except ValueError:
        raise InputError(f"--t-samples: cannot parse {args.t_samples!r}") from None


# ---------------------------------------------------------------------------
# subcommands


def cmd_verify_web(args) -> dict:
    spec = _expect(load_problem(args.spec), web.WebSpec, "verify-web")
    mats = web.web_matrices(spec, check=False)
    pts = spec.sample_points(args.points, args.seed)
    conn = web.chern_connection(spec, check=bool(spec.samples))
    tors = [c for a in conn.torsion for b in a for c in b]
    curv = web.curvature(spec, conn)
    ric = [c for r in curv.ricci for c in r]
    riem = [d for a in curv.riemann for b in a for c in b for d in c]
    norms = {
        "christoffel": max_abs([c for a in conn.gamma for b in a for c in b], pts),
        "torsion": max_abs(tors, pts),
        "riemann": max_abs(riem, pts),
        "ricci": max_abs(ric, pts),
    }
    verdicts = {"torsion_free": norms["torsion"] < args.tol, "ricci_flat": norms["ricci"] < args.tol}
    if spec.m == 2:
        norms["hirota"] = max_abs(web.hirota_residuals(spec), pts)
        conf = web.conformal_data(spec, pts, args.tol)
        norms["lee"] = max_abs(conf.lee.coeffs.values(), pts)
        norms["dlee"] = max_abs(conf.dlee.coeffs.values(), pts)
        verdicts["hyper_kahler"] = conf.hyper_kahler if conf.hyper_kahler is not None else False
        verdicts["lee_ricci_consistent"] = (not verdicts["torsion_free"]) or (
            (norms["dlee"] < args.tol) == verdicts["ricci_flat"]
        )
    rep = _base(args, "verify-web")
    rep.update({"m": spec.m, "w": [E.to_string(w) for w in spec.w], "norms": norms, "verdicts": verdicts})
    rep["det_W_x"] = E.to_string(mats.det_x)
    return rep


def cmd_heavenly_residual(args) -> dict:
    ts = _expect(load_problem(args.spec), heavenly.ThetaSpec, "heavenly-residual")
    res = heavenly.heavenly_residual(ts)
    unit = {n: Fraction(1) for n in ts.coords}
    pts = [unit] + (_points(ts.coords, argparse.Namespace(points=args.points - 1, seed=args.seed)) if args.points > 1 else [])
    per = {f"{i}{j},{k}{l}": max_abs([e], pts) for ((i, j), (k, l)), e in res.items()}
    worst = max(per.values(), default=0.0)
    unit_vals = {f"{i}{j},{k}{l}": _num(E.evaluate(e, unit)) for ((i, j), (k, l)), e in res.items()}
    rep = _base(args, "heavenly-residual")
    rep.update(
        {
            "m": ts.m,
            "system_shape": list(heavenly.system_shape(ts.m)),
            "unit_point_values": unit_vals,
            "norms": {"residual": worst, "per_component": per},
            "verdicts": {"residual_zero": worst < args.tol},
        }
    )
    return rep


def cmd_eq1_check(args) -> dict:
    hs = _expect(load_problem(args.spec), heavenly.HeavenlySpec, "eq1-check")
    pts = _points(hs.coords, args)
    res = heavenly.eq1_residual(hs)
    worst = max_abs(res.values(), pts)
    ok, violations = heavenly.boundary_check(hs)
    _, trace = heavenly.curvature_from_R(hs)
    rep = _base(args, "eq1-check")
    rep.update(
        {
            "m": hs.m,
            "norms": {"eq1": worst, "ricci_trace": max_abs(trace.values(), pts)},
            "boundary": {"normalized": ok, "violations": violations},
            "verdicts": {"eq1_holds": worst < args.tol},
        }
    )
    return rep


def cmd_lax_check(args) -> dict:
    hs = _expect(load_problem(args.spec), heavenly.HeavenlySpec, "lax-check")
    pts = _points(hs.coords, args)
    ts = _t_samples(args)
    per_t = {}
    for t in ts:
        comms = heavenly.lax_commutators(hs, t)
        per_t[str(t)] = max_abs([c for v in comms.values() for c in v], pts)
    eq1 = max_abs(heavenly.eq1_residual(hs).values(), pts)
    lax_ok = all(v < args.tol for v in per_t.values())
    rep = _base(args, "lax-check")
    rep.update(
        {
            "m": hs.m,
            "t_samples": [str(t) for t in ts],
            "norms": {"commutators": per_t, "eq1": eq1},
            "verdicts": {"lax_commute": lax_ok, "agrees_with_eq1": lax_ok == (eq1 < args.tol)},
        }
    )
    return rep


def cmd_ode_invariants(args) -> dict:
    spec = _expect(load_problem(args.spec), ode.OdeSpec, "ode-invariants")
    names = spec.coords
    pts = _points(names, args)
    T = ode.jacobi_endomorphism(spec)
    B = ode.berwald(spec)
    W = ode.wilczynski(spec, T)
    entries = lambda M: [M[i, j] for i in range(spec.m) for j in range(spec.m)]  # noqa: E731
    norms = {"T": max_abs(entries(T), pts), "trB": max_abs(entries(B.trB), pts), "wilczynski": max_abs(entries(W), pts)}
    trb_zero = norms["trB"] < args.tol
    rep = _base(args, "ode-invariants")
    rep.update(
        {
            "m": spec.m,
            "T": _matrix_label(T, names),
            "trB": _matrix_label(B.trB, names),
            "wilczynski": _matrix_label(W, names),
            "divergence": _pretty(B.divergence, names),
            "divergence_linear_in_y": B.divergence_linear,
            "norms": norms,
            "verdicts": {
                "trace_free_berwald": trb_zero,
                "wilczynski_zero": norms["wilczynski"] < args.tol,
                "berwald_detections_agree": B.divergence_linear is None or B.divergence_linear == trb_zero,
            },
        }
    )
    return rep


def cmd_gauge_residual(args) -> dict:
    doc = _read_json(args.spec)
    spec = _expect(problem_from_dict(doc), ode.OdeSpec, "gauge-residual")
    src = args.ttilde or doc.get("ttilde")
    if not src:
        raise InputError("ttilde: give --ttilde or a \"ttilde\" field in the problem file")
    tt = _parse_field(src, "ttilde", ("t", "x1", "x2"))
    try:
        res = ode.gauge_residual(spec, tt)
    except ode.OdeError as exc:
        raise InputError(str(exc)) from None
    pts = _points(spec.coords, args, avoid=[E.differentiate(tt, "t")])
    worst = max_abs([res], pts)
    rep = _base(args, "gauge-residual")
    rep.update({"ttilde": E.to_string(tt), "norms": {"residual": worst}, "verdicts": {"gauge_solves": worst < args.tol}})
    return rep


def cmd_biham_check(args) -> dict:
    hs = _expect(load_problem(args.spec), heavenly.HeavenlySpec, "biham-check")
    P = biham.pencil(hs)
    pts = biham.random_pencil_points(hs.m, args.points, args.seed)
    ts = _t_samples(args)
    jac = {}
    witness = None
    for t in ts:
        Pt = P.at(t)
        T = biham.schouten_bracket(Pt, Pt)
        jac[str(t)] = biham.trivector_max_abs(T, pts)
        if witness is None and jac[str(t)] >= args.tol:
            w = biham.nonzero_witness(T, pts, args.tol)
            if w is not None:
                (a, b, c), p, v = w
                witness = {"t": str(t), "indices": [P.coords[a], P.coords[b], P.coords[c]], "point": p, "value": v}
    compat = {}
    for s, t in ((0, 1), (1, 2), (-1, 3)):
        compat[f"{s},{t}"] = biham.trivector_max_abs(biham.schouten_bracket(P.at(s), P.at(t)), pts)
    ranks = [biham.kronecker_rank(P, float(ts[0]) if ts else 1.0, p) for p in pts]
    rep = _base(args, "biham-check")
    rep.update(
        {
            "m": hs.m,
            "t_samples": [str(t) for t in ts],
            "norms": {"jacobi": jac, "compatibility": compat},
            "ranks": ranks,
            "witness": witness,
            "verdicts": {
                "poisson": all(v < args.tol for v in jac.values()),
                "compatible": all(v < args.tol for v in compat.values()),
                "rank_2m": all(r == 2 * hs.m for r in ranks),
            },
        }
    )
    return rep


def _theta_of(ts: heavenly.ThetaSpec) -> E.Expr:
    if ts.m != 2:
        raise InputError("the solver handles m = 2 only")
    return ts.t(1, 2)


def cmd_solve(args) -> dict:
    ts = _expect(load_problem(args.spec), heavenly.ThetaSpec, "solve")
    D = args.degree if args.degree is not None else 6
    try:
        sol = solver.jet_solve(solver.parse_seed(_theta_of(ts)), D)
    except (solver.SolverError, E.NotPolynomialError) as exc:
        raise InputError(f"solve: {exc}") from None
    cert = solver.certify(sol)
    rep = _base(args, "solve")
    rep.update(
        {
            "D": D,
            "theta": sol.theta_json(),
            "theta_expr": sol.theta.to_string(),
            "levels": [l.as_dict() for l in sol.levels],
            "unique": sol.unique,
            "certificate": cert,
            "verdicts": {"residual_clean": sol.residual_clean(), "certified": cert["pass"]},
        }
    )
    return rep


def _solution_from_json(doc: dict) -> solver.JetSolution:
    try:
        terms = {}
        for key, val in doc["theta"].items():
            mono = tuple(int(p) for p in key.strip("()").split(","))
            if len(mono) != 4:
                raise ValueError(key)
            terms[mono] = Fraction(val)
        D = int(doc["D"])
    except (KeyError, ValueError, TypeError, AttributeError) as exc:
        raise InputError(f"solution file: malformed entry {exc}") from None
    return solver.from_theta(Poly(solver.VARS, terms), D)


def cmd_certify(args) -> dict:
    doc = _read_json(args.spec)
    if isinstance(doc, dict) and "kind" not in doc and "theta" in doc and "D" in doc:
        sol = _solution_from_json(doc)
    else:
        ts = _expect(problem_from_dict(doc), heavenly.ThetaSpec, "certify")
        try:
            sol = solver.from_theta(_theta_of(ts), args.degree if args.degree is not None else 6)
        except E.NotPolynomialError as exc:
            raise InputError(f"certify: {exc}") from None
    cert = solver.certify(sol)
    rep = _base(args, "certify")
    rep.update({"D": sol.D, "certificate": cert, "verdicts": {k: cert[k]["pass"] for k in "abcde"}})
    return rep


COMMANDS: dict[str, Callable[[argparse.Namespace], dict]] = {
    "verify-web": cmd_verify_web,
    "heavenly-residual": cmd_heavenly_residual,
    "eq1-check": cmd_eq1_check,
    "lax-check": cmd_lax_check,
    "ode-invariants": cmd_ode_invariants,
    "gauge-residual": cmd_gauge_residual,
    "biham-check": cmd_biham_check,
    "solve": cmd_solve,
    "certify": cmd_certify,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="segreweb", description="Checks for webs, heavenly systems and ODE invariants.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--spec", required=True, help="problem JSON file")
        p.add_argument("--points", type=int, default=10, help="number of sample points")
        p.add_argument("--tol", type=float, default=1e-9, help="verdict threshold")
        p.add_argument("--seed", type=int, default=0, help="sampling seed")
        p.add_argument("--t-samples", default="1,2,3", help="comma separated pencil parameters")
        p.add_argument("--degree", type=int, default=None, help="jet order D")
        p.add_argument("--timing", action="store_true", help="add wall time to the report")
        if name == "gauge-residual":
            p.add_argument("--ttilde", default=None, help="gauge function of (t, x1, x2)")
    return ap


def _jsonable(o):
    if isinstance(o, Fraction):
        return _num(o)
    if isinstance(o, (set, tuple)):
        return list(o)
    raise TypeError(f"cannot serialize {type(o).__name__}")


def run(argv: Sequence[str] | None = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    if args.points < 1:
        print("error: --points must be positive", file=sys.stderr)
        return 2
    start = time.perf_counter()
    try:
        rep = COMMANDS[args.command](args)
    except (InputError, E.ExprError, web.WebError, heavenly.HeavenlyError, ode.OdeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        json.dump({"command": args.command, "spec": args.spec, "error": str(exc)}, sys.stdout)
        sys.stdout.write("\n")
        return 2
    if args.timing:
        rep["timing_s"] = round(time.perf_counter() - start, 6)
    json.dump(rep, sys.stdout, indent=2, sort_keys=True, default=_jsonable)
    sys.stdout.write("\n")
    return 0 if all(v is not False for v in rep.get("verdicts", {}).values()) else 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
