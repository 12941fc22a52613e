from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from robust_expansion import mp
from robust_expansion.model import (
    CANDIDATE,
    Bus,
    Demand,
    Generator,
    InvestmentPlan,
    NetworkCase,
    PlanningConfig,
    expand_statuses,
    nominal_realization,
)
from robust_expansion.opf import build_opf, solve_opf
from robust_expansion.oracle import oracle_worst_cost
from robust_expansion.subproblem import build_dual_subproblem, dual_bounds, solve_subproblem, with_gamma

from _instances import random_case

SIGMA = 8760.0


def one_bus(dev=100.0, gamma_g=1, gamma_d=0, load_dev=0.0, shed=1000.0):
    cfg = PlanningConfig(1, 0.0, SIGMA, 0, 0, gamma_d, gamma_g)
    return NetworkCase("one", (Bus("1", True),), (), (Generator("g", "1", 10, 100, dev),),
                       (Demand("d", "1", 80, load_dev, shed, (1.0,), (1.0,), (1.0,)),), cfg)


def statuses(case, plan=None):
    return expand_statuses(plan or InvestmentPlan.empty(case), case)


def nominal_cost(case, t=1):
    return solve_opf(build_opf(case, statuses(case), nominal_realization(case, t))).cost


def test_dual_bounds_examples():
    case = one_bus()
    b = dual_bounds(case)
    assert b.lam_abs == pytest.approx(8.76e6)
    assert b.alpha_abs == pytest.approx(8.76e6)
    assert b.phi_d_lo == pytest.approx(-8.76e6)
    assert b.phi_g_lo == pytest.approx(-SIGMA * 1010)
    no_demand = replace(case, demands=())
    nb = dual_bounds(no_demand)
    assert nb.lam_abs == nb.alpha_abs == nb.phi_d_lo == nb.phi_g_lo == 0.0
    double = replace(case, demands=(replace(case.demands[0], shed_cost=2000.0),))
    assert dual_bounds(double).lam_abs == pytest.approx(2 * b.lam_abs)


def test_no_uncertainty_gives_nominal_cost():
    case = one_bus(dev=0.0)
    wc = solve_subproblem(case, statuses(case), 1)
    assert wc.c_op == pytest.approx(nominal_cost(case))


def test_zero_budgets_force_nominal():
    case = one_bus(gamma_g=0, gamma_d=0, load_dev=10.0)
    sub = build_dual_subproblem(case, statuses(case), 1)
    out = mp.solve(sub.program)
    assert out.objective * sub.scale == pytest.approx(nominal_cost(case))
    wc = solve_subproblem(case, statuses(case), 1)
    assert sum(wc.realization.z_gen.values()) == 0
    assert wc.c_op == pytest.approx(nominal_cost(case))


@pytest.mark.parametrize("backend", ["builtin", "highs"])
def test_single_bus_worst_case(backend):
    case = one_bus()
    wc = solve_subproblem(case, statuses(case), 1, backend=backend)
    assert wc.realization.z_gen == {"g": 1}
    assert wc.c_op == pytest.approx(SIGMA * 1000 * 80)


def test_inactive_generator_never_deviates():
    cfg = PlanningConfig(2, 0.0, SIGMA, 0, 100, 0, 2)
    case = NetworkCase(
        "c", (Bus("1", True),), (),
        (Generator("g", "1", 10, 100, 50), Generator("n", "1", 5, 60, 60, CANDIDATE, 10.0)),
        (Demand("d", "1", 80, 0, 1000, (1.0,) * 2, (1.0,) * 2, (1.0,) * 2),), cfg)
    st_ = statuses(case, InvestmentPlan.from_periods(case, gens={"n": 2}))
    wc = solve_subproblem(case, st_, 1)
    assert wc.realization.z_gen["n"] == 0
    wc2 = solve_subproblem(case, st_, 2)
    assert wc2.realization.z_gen["n"] == 1


def _random_triple(seed):
    case = random_case(seed)
    rng = np.random.default_rng(seed + 7)
    ny = case.planning.horizon_years
    plan = InvestmentPlan.from_periods(
        case,
        lines={k.id: int(rng.integers(1, ny + 1)) for k in case.candidate_lines if rng.random() < 0.6},
        gens={g.id: int(rng.integers(1, ny + 1)) for g in case.candidate_generators
              if g.group_id is None and rng.random() < 0.6},
    )
    return case, statuses(case, plan), int(rng.integers(1, ny + 1))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_matches_vertex_enumeration(seed):
    case, st_, t = _random_triple(seed)
    wc = solve_subproblem(case, st_, t)
    ref = oracle_worst_cost(case, st_, t)
    assert wc.c_op == pytest.approx(ref.c_op, rel=1e-6)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000))
def test_monotone_in_demand_budget(seed):
    case, st_, t = _random_triple(seed)
    cfg = case.planning
    if cfg.gamma_d >= len(case.demands):
        cfg = with_gamma(cfg, gamma_d=max(0, len(case.demands) - 1))
    low = solve_subproblem(replace(case, planning=cfg), st_, t).c_op
    high = solve_subproblem(replace(case, planning=with_gamma(cfg, gamma_d=cfg.gamma_d + 1)), st_, t).c_op
    assert high >= low - 1e-6 * max(1.0, low)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000))
def test_monotone_in_generation_budget(seed):
    case, st_, t = _random_triple(seed)
    cfg = case.planning
    low = solve_subproblem(case, st_, t).c_op
    high = solve_subproblem(replace(case, planning=with_gamma(cfg, gamma_g_base=cfg.gamma_g_base + 1)), st_, t).c_op
    assert high >= low - 1e-6 * max(1.0, low)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000))
def test_worst_case_never_below_nominal(seed):
    case, st_, t = _random_triple(seed)
    nominal = solve_opf(build_opf(case, st_, nominal_realization(case, t))).cost
    assert solve_subproblem(case, st_, t).c_op >= nominal - 1e-6 * max(1.0, nominal)


def test_highs_and_builtin_agree():
    for seed in range(10):
        case, st_, t = _random_triple(seed)
        a = solve_subproblem(case, st_, t, backend="builtin").c_op
        b = solve_subproblem(case, st_, t, backend="highs").c_op
        assert a == pytest.approx(b, rel=1e-6)
