from dataclasses import replace

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from robust_expansion.model import (
    CANDIDATE,
    LINE_CANDIDATE,
    Bus,
    Demand,
    Generator,
    InvestmentPlan,
    Line,
    NetworkCase,
    PlanningConfig,
    expand_statuses,
    nominal_realization,
    operational_weight,
)
from robust_expansion.opf import build_opf, evaluate_plan, solve_opf
from robust_expansion.oracle import (
    EnumerationBudget,
    EnumerationLimit,
    enumerate_plans,
    enumerate_vertices,
    oracle_global_solve,
    oracle_worst_cost,
    plan_worst_objective,
)

from _instances import random_case

SIGMA = 8760.0


def two_gen_case(gamma_g=1, gamma_d=1, candidate=False):
    cfg = PlanningConfig(1, 0.0, SIGMA, 0, 100, gamma_d, gamma_g)
    second = Generator("h", "1", 20, 50, 20, CANDIDATE, 5.0) if candidate else Generator("h", "1", 20, 50, 20)
    return NetworkCase("two", (Bus("1", True),), (), (Generator("g", "1", 10, 100, 40), second),
                       (Demand("d", "1", 80, 10, 1000, (1.0,), (1.0,), (1.0,)),), cfg)


def empty_statuses(case):
    return expand_statuses(InvestmentPlan.empty(case), case)


def test_vertex_counts():
    case = two_gen_case()
    assert len(enumerate_vertices(case, empty_statuses(case), 1)) == 6
    case0 = two_gen_case(gamma_g=0, gamma_d=0)
    only = enumerate_vertices(case0, empty_statuses(case0), 1)
    assert len(only) == 1
    assert sum(only[0].z_gen.values()) + sum(only[0].z_dem.values()) == 0
    # an unbuilt generator keeps its indicator at zero
    cand = two_gen_case(candidate=True)
    assert len(enumerate_vertices(cand, empty_statuses(cand), 1)) == 4


def test_vertex_cap_raises():
    case = two_gen_case()
    with pytest.raises(EnumerationLimit, match="6"):
        enumerate_vertices(case, empty_statuses(case), 1, budget=EnumerationBudget(max_vertices=5))


def test_plan_cap_raises():
    with pytest.raises(EnumerationLimit):
        list(enumerate_plans(random_case(1, cand_lines=2, cand_gens=2), EnumerationBudget(max_plans=3)))


def test_single_bus_worst_case():
    cfg = PlanningConfig(1, 0.0, SIGMA, 0, 0, 0, 1)
    case = NetworkCase("one", (Bus("1", True),), (), (Generator("g", "1", 10, 100, 100),),
                       (Demand("d", "1", 80, 0, 1000, (1.0,), (1.0,), (1.0,)),), cfg)
    assert oracle_worst_cost(case, empty_statuses(case), 1).c_op == pytest.approx(SIGMA * 1000 * 80)


def test_deterministic_case_gives_nominal_cost():
    case = two_gen_case(gamma_g=0, gamma_d=0)
    st_ = empty_statuses(case)
    nominal = solve_opf(build_opf(case, st_, nominal_realization(case, 1))).cost
    assert oracle_worst_cost(case, st_, 1).c_op == pytest.approx(nominal)


def test_no_candidates_single_plan():
    case = random_case(5, cand_lines=0, cand_gens=0)
    res = oracle_global_solve(case)
    assert res.plans_evaluated == 1
    st_ = empty_statuses(case)
    expected = sum(operational_weight(case.planning.discount_rate, t) * oracle_worst_cost(case, st_, t).c_op
                   for t in case.periods) / 1e6
    assert res.objective == pytest.approx(expected, rel=1e-12)


def test_one_line_two_periods_hand_checked():
    cfg = PlanningConfig(2, 0.1, SIGMA, 100, 0, 0, 0)
    case = NetworkCase(
        "two", (Bus("1", True), Bus("2")), (Line("L", "1", "2", 100.0, 100.0, LINE_CANDIDATE, 10.0),),
        (Generator("g", "1", 10, 200, 0),), (Demand("d", "2", 80, 0, 1000, (1.0,) * 2, (1.0,) * 2, (1.0,) * 2),),
        cfg)
    plans = list(enumerate_plans(case))
    assert len(plans) == 3
    shed, serve = SIGMA * 1000 * 80 / 1e6, SIGMA * 10 * 80 / 1e6
    never = shed / 1.1 + shed / 1.1 ** 2
    late = 10 / 1.1 + shed / 1.1 + serve / 1.1 ** 2
    early = 10 + serve / 1.1 + serve / 1.1 ** 2
    res = oracle_global_solve(case)
    assert res.objective == pytest.approx(min(never, late, early), rel=1e-12)
    assert res.plan.build_periods()[0] == {"L": 1}


def test_ties_prefer_smallest_plan_key():
    case = two_gen_case(candidate=True)
    # zero demand and a free candidate make every plan cost nothing
    free = replace(case, generators=(case.generators[0], replace(case.generators[1], invest_cost=0.0)),
                   demands=(replace(case.demands[0], load_nominal_mw=0.0, load_deviation_mw=0.0),))
    res = oracle_global_solve(free)
    assert res.objective == 0.0
    assert res.plan == min(enumerate_plans(free), key=lambda p: p.key())


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000))
def test_worst_never_below_nominal(seed):
    case = random_case(seed)
    st_ = empty_statuses(case)
    for t in case.periods:
        nominal = solve_opf(build_opf(case, st_, nominal_realization(case, t))).cost
        assert oracle_worst_cost(case, st_, t).c_op >= nominal - 1e-9 * max(1.0, nominal)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10_000))
def test_global_optimum_beats_every_plan(seed):
    case = random_case(seed)
    res = oracle_global_solve(case)
    cache: dict = {}
    for plan in enumerate_plans(case):
        assert res.objective <= plan_worst_objective(case, plan, cache) + 1e-9
        assert evaluate_plan(case, plan).total <= plan_worst_objective(case, plan, cache) + 1e-9
