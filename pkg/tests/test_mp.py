import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from robust_expansion import mp
from robust_expansion.mp.simplex import LPKernel

from _oracles import binary_enumeration, random_binary_program, random_lp, vertex_enumeration


def small_lp():
    # max 3x + 2y  s.t. x + y <= 4, x + 3y <= 6, x <= 3
    p = mp.MathProgram("small")
    x = p.add_var("x", 0, 3)
    y = p.add_var("y")
    p.add_constraint({x: 1, y: 1}, mp.LE, 4, "c1")
    p.add_constraint({x: 1, y: 3}, mp.LE, 6, "c2")
    p.set_objective({x: 3, y: 2}, "max")
    return p


def test_small_lp_solution_and_duals():
    out = mp.solve_lp(small_lp())
    assert out.status is mp.Status.OPTIMAL
    assert out.objective == pytest.approx(11.0)
    assert out.value("x") == pytest.approx(3.0)
    assert out.value("y") == pytest.approx(1.0)
    assert out.dual("c1") == pytest.approx(2.0)
    assert out.dual("c2") == pytest.approx(0.0)


def test_duals_are_rhs_derivatives():
    for seed in range(20):
        p, data = random_lp(seed)
        base = mp.solve_lp(p)
        assert base.optimal
        h = 1e-5
        for i, con in enumerate(p.constraints):
            q, _ = random_lp(seed)
            old = q.constraints[i]
            q.constraints[i] = type(old)(old.name, old.coefs, old.sense, old.rhs + h)
            bumped = mp.solve_lp(q)
            if not bumped.optimal:
                continue
            fd = (bumped.objective - base.objective) / h
            # degenerate vertices give one-sided derivatives; skip those
            q2, _ = random_lp(seed)
            q2.constraints[i] = type(old)(old.name, old.coefs, old.sense, old.rhs - h)
            down = mp.solve_lp(q2)
            if down.optimal and abs((base.objective - down.objective) / h - fd) < 1e-4:
                assert base.duals[i] == pytest.approx(fd, abs=1e-4)


def test_strong_duality_on_random_lps():
    for seed in range(30):
        p, data = random_lp(seed)
        out = mp.solve_lp(p)
        arr = p.to_arrays()
        # dual objective: row duals times active row bound plus reduced costs times bound of each column
        y, d = out.duals, out.reduced_costs
        row_bound = np.where(y * (1 if arr.sense == "min" else -1) >= 0, arr.row_lo, arr.row_hi)
        row_bound = np.where(np.isfinite(row_bound), row_bound, 0.0)
        col_bound = np.where(d * (1 if arr.sense == "min" else -1) >= 0, arr.lb, arr.ub)
        dual_obj = float(y @ row_bound + d @ col_bound)
        assert dual_obj == pytest.approx(out.objective, abs=1e-7 * max(1, abs(out.objective)))


def test_simplex_matches_vertex_enumeration():
    # the full 8-variable sweep lives in the acceptance suite
    for seed in range(100):
        p, data = random_lp(seed, n_max=6)
        out = mp.solve_lp(p)
        assert out.optimal
        assert out.objective == pytest.approx(vertex_enumeration(data), abs=1e-7)


def test_bnb_matches_exhaustive_enumeration():
    for seed in range(50):
        p, data = random_binary_program(seed)
        out = mp.solve_mip(p)
        ref = binary_enumeration(data)
        if ref is None:
            assert out.status is mp.Status.INFEASIBLE
        else:
            assert out.objective == pytest.approx(ref, abs=1e-7)
            assert np.all(np.isin(out.x, (0.0, 1.0)))


def test_infeasible_lp_reports_rows():
    p = mp.MathProgram()
    x = p.add_var("x", 0, 1)
    p.add_constraint({x: 1}, mp.GE, 2, "too_big")
    out = mp.solve_lp(p)
    assert out.status is mp.Status.INFEASIBLE
    assert "too_big" in out.infeasible_rows or "x" in out.infeasible_rows


def test_unbounded_lp():
    p = mp.MathProgram()
    x = p.add_var("x", -mp.INF)
    y = p.add_var("y")
    p.add_constraint({x: 1, y: -1}, mp.LE, 1, "c")
    p.set_objective({x: 1, y: 1}, "max")
    assert mp.solve_lp(p).status is mp.Status.UNBOUNDED


def test_free_variables_and_equalities():
    p = mp.MathProgram()
    a = p.add_var("a", -mp.INF)
    b = p.add_var("b", -mp.INF)
    p.add_constraint({a: 1, b: 1}, mp.EQ, 2, "sum")
    p.add_constraint({a: 1, b: -1}, mp.EQ, 6, "diff")
    p.set_objective({a: 1})
    out = mp.solve_lp(p)
    assert out.value("a") == pytest.approx(4.0)
    assert out.value("b") == pytest.approx(-2.0)


def test_row_scaling_does_not_change_solution():
    p = small_lp()
    q = mp.MathProgram("scaled")
    x = q.add_var("x", 0, 3)
    y = q.add_var("y")
    q.add_constraint({x: 1e6, y: 1e6}, mp.LE, 4e6, "c1")
    q.add_constraint({x: 1e-4, y: 3e-4}, mp.LE, 6e-4, "c2")
    q.set_objective({x: 3e5, y: 2e5}, "max")
    a, b = mp.solve_lp(p), mp.solve_lp(q)
    assert np.allclose(a.x, b.x)
    assert b.objective == pytest.approx(1.1e6)
    assert b.dual("c1") == pytest.approx(0.2)


def test_warm_start_reuses_basis():
    p, _ = random_lp(3)
    kernel = LPKernel(p.to_arrays())
    cold = kernel.solve()
    warm = kernel.solve(basis=cold.basis)
    assert warm.objective == pytest.approx(cold.objective)
    assert warm.iterations <= 1


def test_builtin_and_highs_agree():
    for seed in range(20):
        p, _ = random_lp(seed)
        a, b = mp.solve(p, "builtin"), mp.solve(p, "highs")
        assert a.objective == pytest.approx(b.objective, abs=1e-7)


def test_backend_from_environment(monkeypatch):
    monkeypatch.setenv("ROBUST_EXPANSION_BACKEND", "highs")
    assert mp.default_backend() == "highs"
    monkeypatch.setenv("ROBUST_EXPANSION_BACKEND", "nope")
    with pytest.raises(ValueError):
        mp.default_backend()


def test_program_validation():
    p = mp.MathProgram()
    x = p.add_var("x")
    with pytest.raises(mp.ProgramError):
        p.add_var("x")
    with pytest.raises(mp.ProgramError):
        p.add_var("b", 0, 2, binary=True)
    with pytest.raises(mp.ProgramError):
        p.add_constraint({x: 1}, "<", 1)
    with pytest.raises(mp.ProgramError):
        p.add_constraint({5: 1}, mp.LE, 1)
    with pytest.raises(mp.ProgramError):
        p.add_constraint({x: math.nan}, mp.LE, 1)


def test_lp_text_dump_lists_everything():
    text = small_lp().to_text()
    for token in ("Maximize", "c1", "c2", "x", "y"):
        assert token in text


def test_mip_objective_constant_and_rounding():
    p = mp.MathProgram()
    a = p.add_var("a", 0, 1, binary=True)
    b = p.add_var("b", 0, 1, binary=True)
    c = p.add_var("c", 0, 10)
    p.add_constraint({a: 1, b: 1}, mp.LE, 1, "one")
    p.add_constraint({c: 1, a: -4, b: -7}, mp.LE, 0, "link")
    p.set_objective({a: -1, b: -2, c: 1}, "max", constant=5)
    out = mp.solve_mip(p)
    assert out.objective == pytest.approx(5 + 7 - 2)
    assert out.value("b") == 1.0


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_simplex_solution_is_feasible(seed):
    p, data = random_lp(seed, n_max=6, m_max=4)
    out = mp.solve_lp(p)
    x = out.x
    assert np.all(x >= data["lb"] - 1e-9) and np.all(x <= data["ub"] + 1e-9)
    ax = data["A"] @ x
    le = data["senses"] == mp.LE
    assert np.all(ax[le] <= data["rhs"][le] + 1e-7)
    assert np.all(ax[~le] >= data["rhs"][~le] - 1e-7)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_bnb_never_beats_enumeration(seed):
    p, data = random_binary_program(seed, n_max=10)
    out = mp.solve_mip(p)
    ref = binary_enumeration(data)
    if ref is not None:
        assert out.objective == pytest.approx(ref, abs=1e-7)
