import json
import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from segreweb.heavenly import ThetaSpec, heavenly_residual
from segreweb.poly import Poly, to_poly
from segreweb.solver import (
    VARS,
    InfeasibleLevel,
    SolverError,
    certify,
    from_theta,
    grid_residual,
    jet_solve,
    min_norm_solve,
    parse_seed,
    residual_poly,
    residual_via_expr,
    sample_grid,
    solution_json,
)
from strategies import polynomials

# a seed with y-dependent cubic terms whose residual vanishes at orders <= 1
Y_SEED = "x1^2/2 + x2^2/2 - x1*y2 + x1^2*y1 - x2^2*y1 - 2*x1*x2*y2"


def truncated_zero(p: Poly, order: int) -> bool:
    return p.truncate(order).is_zero()


class TestMinNorm:
    def test_square(self):
        u, rank = min_norm_solve([[2, 0], [0, 4]], [1, 1])
        assert u == [Fraction(1, 2), Fraction(1, 4)] and rank == 2

    def test_underdetermined(self):
        u, rank = min_norm_solve([[1, 1]], [2])
        assert u == [1, 1] and rank == 1

    def test_redundant_rows(self):
        u, rank = min_norm_solve([[1, 2, 0], [2, 4, 0], [0, 0, 1]], [5, 10, 3])
        assert rank == 2 and u == [1, 2, 3]

    def test_inconsistent(self):
        with pytest.raises(InfeasibleLevel) as exc:
            min_norm_solve([[1, 1], [2, 2]], [1, 3])
        assert exc.value.rows == [1]

    def test_zero_matrix(self):
        assert min_norm_solve([[0, 0]], [0]) == ([0, 0], 0)

    @settings(max_examples=30)
    @given(st.integers(1, 4), st.integers(1, 6), st.integers(0, 10_000))
    def test_solution_is_minimal(self, rows, cols, seed):
        rng = random.Random(seed)
        A = [[Fraction(rng.randint(-3, 3)) for _ in range(cols)] for _ in range(rows)]
        x0 = [Fraction(rng.randint(-3, 3)) for _ in range(cols)]
        b = [sum(a * x for a, x in zip(r, x0)) for r in A]
        u, rank = min_norm_solve(A, b)
        assert [sum(a * x for a, x in zip(r, u)) for r in A] == b
        assert rank == np.linalg.matrix_rank(np.array(A, dtype=float))
        # u lies in the row space, so it is orthogonal to the null space: |u| <= |x0|
        assert sum(x * x for x in u) <= sum(x * x for x in x0)
        ns = _null_space(A, cols)
        assert all(sum(a * b for a, b in zip(u, v)) == 0 for v in ns)


def _null_space(A, n):
    M = [list(r) for r in A]
    piv_cols, r = [], 0
    for c in range(n):
        p = next((i for i in range(r, len(M)) if M[i][c] != 0), None)
        if p is None:
            continue
        M[r], M[p] = M[p], M[r]
        M[r] = [x / M[r][c] for x in M[r]]
        for i in range(len(M)):
            if i != r and M[i][c] != 0:
                f = M[i][c]
                M[i] = [x - f * y for x, y in zip(M[i], M[r])]
        piv_cols.append(c)
        r += 1
    out = []
    for free in (c for c in range(n) if c not in piv_cols):
        v = [Fraction(0)] * n
        v[free] = Fraction(1)
        for i, c in enumerate(piv_cols):
            v[c] = -M[i][free]
        out.append(v)
    return out


class TestResidual:
    def test_examples(self):
        assert residual_poly(parse_seed("x1^3/6")).is_zero()
        assert residual_poly(parse_seed("x1^2*x2^2")) == parse_seed("-12*x1^2*x2^2")

    @given(polynomials(VARS, 4, 6))
    def test_routes_agree(self, e):
        p = to_poly(e, VARS)
        assert residual_poly(p) == residual_via_expr(p)

    def test_via_heavenly_module(self):
        p = parse_seed(Y_SEED)
        direct = to_poly(heavenly_residual(ThetaSpec(2, {(1, 2): p.to_expr()}))[((1, 2), (1, 2))], VARS)
        assert direct == residual_poly(p)


class TestJetSolve:
    def test_zero_seed(self):
        sol = jet_solve("0", 6)
        assert sol.theta.is_zero() and sol.residual.is_zero()

    def test_exact_solution_is_reproduced(self):
        sol = jet_solve("x1^3/6", 8)
        assert sol.theta == parse_seed("x1^3/6")
        assert truncated_zero(sol.residual, 6)

    def test_y_dependent_seed(self):
        sol = jet_solve(Y_SEED, 6)
        assert truncated_zero(residual_via_expr(sol.theta), 4)
        assert sol.theta.truncate(3) == parse_seed(Y_SEED)
        assert sol.residual_clean()

    @pytest.mark.parametrize("D", [3, 4, 5, 7])
    def test_invariant(self, D):
        sol = jet_solve(Y_SEED, D)
        assert truncated_zero(residual_poly(sol.theta), D - 2)
        assert sol.certified_order == D - 2
        assert [l.level for l in sol.levels] == list(range(2, D - 1))

    def test_monotone(self):
        small, big = jet_solve(Y_SEED, 6), jet_solve(Y_SEED, 7)
        assert big.theta.truncate(6) == small.theta
        for a, b in zip(small.levels, big.levels):
            assert a == b

    def test_level_reports(self):
        sol = jet_solve(Y_SEED, 6)
        for rep in sol.levels:
            assert rep.rank <= min(rep.unknowns, rep.equations)
            assert rep.as_dict()["nullity"] == rep.unknowns - rep.rank
        assert sol.unique == all(r.unique for r in sol.levels)

    def test_deterministic(self):
        assert jet_solve(Y_SEED, 6).theta == jet_solve(Y_SEED, 6).theta

    def test_errors(self):
        with pytest.raises(SolverError):
            jet_solve("0", 2)
        with pytest.raises(SolverError):
            jet_solve("x1^4", 6)
        with pytest.raises(SolverError):
            jet_solve("x1*y2", 6)  # residual has a constant term


class TestCertify:
    def test_exact_solution(self):
        rep = certify(jet_solve("x1^3/6", 6))
        assert rep["pass"]
        assert rep["a"]["lowest_surviving_degree"] is None
        assert rep["b"]["R"] == ["0", "-1/2*x1^2"]
        assert rep["b"]["zero_through"] == "exact" and rep["c"]["zero_through"] == "exact"
        assert rep["c"]["max_abs_retained"] == "0"
        assert rep["d"]["ricci_trace_zero"]
        assert rep["e"]["torsion_at_origin"] == "0"

    def test_non_solution(self):
        rep = certify(from_theta("x1^2*x2^2", 6))
        assert not rep["pass"] and not rep["a"]["pass"]
        assert rep["a"]["lowest_surviving_degree"] == 4
        assert rep["a"]["witness"] == {"(2,2,0,0)": "-12"}

    def test_zero(self):
        rep = certify(from_theta("0", 6))
        assert rep["pass"] and all(rep[k]["pass"] for k in "abcde")

    @pytest.mark.parametrize("D", [5, 6])
    def test_solver_outputs(self, D):
        rep = certify(jet_solve(Y_SEED, D))
        assert rep["pass"], rep
        assert rep["c"]["orders_consistent"]
        assert rep["b"]["zero_through"] == rep["c"]["zero_through"]

    def test_json_round_trip(self):
        sol = jet_solve(Y_SEED, 5)
        doc = json.loads(solution_json(sol, certify(sol)))
        assert doc["D"] == 5 and doc["certificate"]["pass"]
        rebuilt = Poly(VARS, {tuple(int(v) for v in k.strip("()").split(",")): Fraction(c) for k, c in doc["theta"].items()})
        assert rebuilt == sol.theta


class TestGrid:
    def test_exact_on_quadratics(self):
        vals, h = sample_grid(parse_seed("x1^2*x2^2"), n=7)
        r = grid_residual(vals, h)
        axis = np.linspace(-0.5, 0.5, 7)[2:-2]
        X1, X2 = np.meshgrid(axis, axis, indexing="ij")
        expected = -12 * X1**2 * X2**2
        assert np.allclose(r, expected[:, :, None, None], atol=1e-9)

    def test_solution(self):
        vals, h = sample_grid(parse_seed("x1^3/6 + x1*y1"), n=7)
        assert np.abs(grid_residual(vals, h)).max() < 1e-9

    def test_shape_error(self):
        with pytest.raises(SolverError):
            grid_residual(np.zeros((3, 3)), [1, 1])
