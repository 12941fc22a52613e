"""Brute-force references for small instances.

Nothing here scales; the point is to have answers that are correct by
construction so the decomposition can be checked against them.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, replace
from math import comb

from .model import (
    MEUR,
    InvestmentPlan,
    NetworkCase,
    PlanningConfig,
    StatusSchedule,
    UncertaintyRealization,
    count_new_active,
    ensure_valid,
    expand_statuses,
    gamma_g_budget,
    investment_npc,
    operational_weight,
    phasing_violations,
    realize_uncertainty,
)
from .opf import OPFInfeasible, build_opf, solve_opf
from .subproblem import WorstCase


TIE_TOL = 1e-12


class EnumerationLimit(RuntimeError):
    pass


@dataclass(frozen=True)
class EnumerationBudget:
    max_vertices: int = 4096
    max_plans: int = 20000

    def __post_init__(self):
        if self.max_vertices < 1 or self.max_plans < 1:
            raise ValueError("enumeration caps must be positive")


def _subsets(ids: list[str], k_max: int):
    for k in range(min(k_max, len(ids)) + 1):
        yield from itertools.combinations(ids, k)


def _count(n: int, k_max: int) -> int:
    return sum(comb(n, k) for k in range(min(k_max, n) + 1))


def enumerate_vertices(
    case: NetworkCase,
    statuses: StatusSchedule,
    t: int,
    config: PlanningConfig | None = None,
    budget: EnumerationBudget | None = None,
    deviating_only: bool = False,
) -> list[UncertaintyRealization]:
    """Every feasible binary deviation pattern for period ``t``.

    With ``deviating_only`` the indicators of assets whose deviation is zero
    are held at 0, which drops duplicate realizations.
    """
    cfg = config or case.planning
    budget = budget or EnumerationBudget()
    gen_on = statuses.gens_at(t)
    gens = [g.id for g in case.generators if gen_on[g.id] and (g.cap_deviation_mw > 0 or not deviating_only)]
    dems = [d.id for d in case.demands
            if (d.load_deviation_mw * d.growth_dispersion[t - 1] > 0 or not deviating_only)]
    gamma_g = gamma_g_budget(cfg, count_new_active(case, gen_on))
    n = _count(len(gens), gamma_g) * _count(len(dems), cfg.gamma_d)
    if n > budget.max_vertices:
        raise EnumerationLimit(f"{n} uncertainty vertices in period {t} exceed the cap {budget.max_vertices}")
    out = []
    for zg in _subsets(gens, gamma_g):
        for zd in _subsets(dems, cfg.gamma_d):
            out.append(realize_uncertainty(case, gen_on, dict.fromkeys(zg, 1), dict.fromkeys(zd, 1), t, cfg))
    return out


def oracle_worst_cost(
    case: NetworkCase,
    statuses: StatusSchedule,
    t: int,
    config: PlanningConfig | None = None,
    budget: EnumerationBudget | None = None,
    backend: str | None = None,
) -> WorstCase:
    """Maximum dispatch cost over all vertices; the first vertex wins ties.

    A realization that leaves the dispatch infeasible gives infinite cost.
    """
    best: WorstCase | None = None
    for u in enumerate_vertices(case, statuses, t, config, budget, deviating_only=True):
        try:
            res = solve_opf(build_opf(case, statuses, u), backend)
        except OPFInfeasible:
            return WorstCase(u, math.inf, None)
        if best is None or res.cost > best.c_op:
            best = WorstCase(u, res.cost, res.duals, res.shed_cost)
    assert best is not None
    return best


def _period_choices(ny: int) -> list[int | None]:
    return [None, *range(1, ny + 1)]


def enumerate_plans(case: NetworkCase, budget: EnumerationBudget | None = None):
    """Budget- and phasing-feasible plans."""
    ensure_valid(case)
    budget = budget or EnumerationBudget()
    cfg = case.planning
    lines = [k.id for k in case.candidate_lines]
    gens = [g.id for g in case.candidate_generators]
    choices = _period_choices(cfg.horizon_years)
    total = len(choices) ** (len(lines) + len(gens))
    if total > budget.max_plans:
        raise EnumerationLimit(f"{total} candidate plans exceed the cap {budget.max_plans}")
    # matches InvestmentPlan.key(): never < late build < early build
    ranked = [None, *reversed(choices[1:])]
    tol = 1e-9
    for periods in itertools.product(ranked, repeat=len(lines) + len(gens)):
        lp = {k: p for k, p in zip(lines, periods) if p is not None}
        gp = {g: p for g, p in zip(gens, periods[len(lines):]) if p is not None}
        plan = InvestmentPlan.from_periods(case, lp, gp)
        if phasing_violations(plan, case):
            continue
        line_npc, gen_npc = investment_npc(plan, case)
        if line_npc > cfg.line_budget + tol * max(1.0, cfg.line_budget):
            continue
        if gen_npc > cfg.gen_budget + tol * max(1.0, cfg.gen_budget):
            continue
        yield plan


@dataclass(frozen=True)
class OracleResult:
    plan: InvestmentPlan
    objective: float  # M€
    plans_evaluated: int


def plan_worst_objective(case: NetworkCase, plan: InvestmentPlan, cache: dict | None = None,
                         budget: EnumerationBudget | None = None, backend: str | None = None) -> float:
    """Investment NPC plus discounted worst-case operating cost of ``plan``, in M€."""
    cache = {} if cache is None else cache
    statuses = expand_statuses(plan, case)
    rate = case.planning.discount_rate
    total = sum(investment_npc(plan, case))
    for t in case.periods:
        key = (t, tuple(sorted(statuses.lines_at(t).items())), tuple(sorted(statuses.gens_at(t).items())))
        if key not in cache:
            cache[key] = oracle_worst_cost(case, statuses, t, None, budget, backend).c_op
        total += operational_weight(rate, t) * cache[key] / MEUR
    return total


def oracle_global_solve(case: NetworkCase, config: PlanningConfig | None = None,
                        budget: EnumerationBudget | None = None, backend: str | None = None) -> OracleResult:
    """Exhaustive minimum of the robust objective over all feasible plans."""
    if config is not None and config != case.planning:
        case = replace(case, planning=config)
    cache: dict = {}
    best: tuple[float, InvestmentPlan] | None = None
    n = 0
    for plan in enumerate_plans(case, budget):
        n += 1
        value = plan_worst_objective(case, plan, cache, budget, backend)
        if best is None or value < best[0] - TIE_TOL * max(1.0, abs(best[0])):
            best = (value, plan)
        elif value <= best[0] + TIE_TOL * max(1.0, abs(best[0])) and plan.key() < best[1].key():
            best = (min(value, best[0]), plan)
    if best is None:
        raise RuntimeError("no plan satisfies the budgets")
    return OracleResult(best[1], best[0], n)
