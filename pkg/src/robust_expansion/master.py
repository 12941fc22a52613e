"""Investment master problem.

Binary build decisions per candidate asset and period, the first-stage rules
(statuses, build-once, budgets, dismantling, phased order), and for every
scenario collected so far a copy of the dispatch constraints with the
uncertainty fixed, tied to a per-period operating-cost epigraph variable γ.

γ is carried in M€ inside the program and reported in € like ``c_op``.

Because the generation uncertainty budget grows with the number of newly
active generators, a scenario found under one plan may lie outside the
uncertainty set of a plan with fewer new generators. Such scenarios get an
activation binary that is forced to 1 only when the plan's budget admits the
scenario, so the cut never overstates the cost of a plan it does not apply to.
"""

from __future__ import annotations

import math
from collections.abc import Mapping
from dataclasses import dataclass, field, replace

from . import mp
from .model import (
    MEUR,
    CaseError,
    InvestmentPlan,
    NetworkCase,
    PlanningConfig,
    StatusSchedule,
    UncertaintyRealization,
    check_plan,
    discount_factor,
    ensure_valid,
    expand_statuses,
    gamma_g_threshold,
    investment_npc,
    nominal_realization,
    operational_weight,
    phasing_violations,
)

__all__ = [
    "MasterError",
    "MasterProgram",
    "MasterSolution",
    "ScenarioPool",
    "build_master",
    "deterministic_equivalent",
    "investment_npc",
    "solve_master",
]


class MasterError(RuntimeError):
    pass


@dataclass
class ScenarioPool:
    """Realizations collected per period; append-only, duplicates ignored."""

    by_period: dict[int, list[UncertaintyRealization]] = field(default_factory=dict)

    def add(self, realization: UncertaintyRealization) -> bool:
        items = self.by_period.setdefault(realization.period, [])
        if any(r.key() == realization.key() for r in items):
            return False
        items.append(realization)
        return True

    def at(self, t: int) -> list[UncertaintyRealization]:
        return list(self.by_period.get(t, ()))

    def __len__(self) -> int:
        return sum(len(v) for v in self.by_period.values())

    def copy(self) -> "ScenarioPool":
        return ScenarioPool({t: list(v) for t, v in self.by_period.items()})


@dataclass(frozen=True)
class MasterProgram:
    program: mp.MathProgram
    case: NetworkCase
    pool: ScenarioPool
    line_build: Mapping[tuple[str, int], int]
    gen_build: Mapping[tuple[str, int], int]
    gamma: Mapping[int, int]


@dataclass(frozen=True)
class MasterSolution:
    plan: InvestmentPlan
    statuses: StatusSchedule
    gamma: dict[int, float]  # €, per period
    lower_bound: float  # M€
    line_npc: float
    gen_npc: float
    nodes: int = 0


def build_master(case: NetworkCase, config: PlanningConfig | None = None,
                 pool: ScenarioPool | None = None) -> MasterProgram:
    if config is not None and config != case.planning:
        case = replace(case, planning=config)
    ensure_valid(case)
    cfg = case.planning
    pool = pool or ScenarioPool()
    periods = range(1, cfg.horizon_years + 1)
    p = mp.MathProgram("master")
    obj: dict[int, float] = {}

    x = {(k.id, t): p.add_var(f"x[{k.id},{t}]", 0, 1, binary=True) for k in case.candidate_lines for t in periods}
    y = {(i.id, t): p.add_var(f"y[{i.id},{t}]", 0, 1, binary=True) for i in case.candidate_generators
         for t in periods}
    xs = {key: p.add_var(f"xs[{key[0]},{key[1]}]", 0, 1) for key in x}
    ys = {key: p.add_var(f"ys[{key[0]},{key[1]}]", 0, 1) for key in y}

    for build, status, assets in ((x, xs, case.candidate_lines), (y, ys, case.candidate_generators)):
        for a in assets:
            for t in periods:
                row = {status[a.id, t]: 1.0}
                for tau in range(1, t + 1):
                    row[build[a.id, tau]] = -1.0
                p.add_constraint(row, mp.EQ, 0.0, f"status[{a.id},{t}]")
            p.add_constraint({build[a.id, t]: 1.0 for t in periods}, mp.LE, 1.0, f"once[{a.id}]")

    line_budget: dict[int, float] = {}
    gen_budget: dict[int, float] = {}
    for t in periods:
        df = discount_factor(cfg.discount_rate, t)
        for k in case.candidate_lines:
            line_budget[x[k.id, t]] = df * k.invest_cost
        for i in case.candidate_generators:
            gen_budget[y[i.id, t]] = df * i.invest_cost
    if line_budget:
        p.add_constraint(line_budget, mp.LE, cfg.line_budget, "budget_lines")
    if gen_budget:
        p.add_constraint(gen_budget, mp.LE, cfg.gen_budget, "budget_gens")
    obj.update(line_budget)
    obj.update(gen_budget)

    for gid, members in case.groups.items():
        for prev, nxt in zip(members, members[1:]):
            for t in periods:
                p.add_constraint({y[nxt.id, t]: 1.0, ys[prev.id, t]: -1.0}, mp.LE, 0.0, f"phase_after[{nxt.id},{t}]")
                p.add_constraint({y[nxt.id, t]: 1.0, y[prev.id, t]: 1.0}, mp.LE, 1.0, f"phase_apart[{nxt.id},{t}]")

    gamma = {t: p.add_var(f"gamma[{t}]", 0.0) for t in periods}
    for t in periods:
        obj[gamma[t]] = operational_weight(cfg.discount_rate, t)

    fixed = expand_statuses(InvestmentPlan.empty(case), case)
    for t in periods:
        for l, u in enumerate(pool.at(t), start=1):
            _add_block(p, case, cfg, t, l, u, xs, ys, gamma[t], fixed.gens_at(t))

    p.set_objective(obj)
    return MasterProgram(p, case, pool, x, y, gamma)


def _add_block(p: mp.MathProgram, case: NetworkCase, cfg: PlanningConfig, t: int, l: int,
               u: UncertaintyRealization, xs, ys, gamma_t: int, fixed_gens: Mapping[str, int]) -> None:
    tag = f"{t},{l}"
    slack = case.slack_bus
    g = {i.id: p.add_var(f"g[{i.id},{tag}]", 0.0) for i in case.generators}
    r = {j.id: p.add_var(f"r[{j.id},{tag}]", 0.0) for j in case.demands}
    theta = {b.id: p.add_var(f"theta[{b.id},{tag}]", -mp.INF) for b in case.buses}
    f = {k.id: p.add_var(f"f[{k.id},{tag}]", -mp.INF) for k in case.lines}

    balance: dict[str, dict[int, float]] = {b.id: {} for b in case.buses}
    load = dict.fromkeys(balance, 0.0)
    for i in case.generators:
        balance[i.bus][g[i.id]] = 1.0
    for j in case.demands:
        balance[j.bus][r[j.id]] = 1.0
        load[j.bus] += u.u_dem[j.id]
    for k in case.lines:
        balance[k.from_bus][f[k.id]] = balance[k.from_bus].get(f[k.id], 0.0) - 1.0
        balance[k.to_bus][f[k.id]] = balance[k.to_bus].get(f[k.id], 0.0) + 1.0
    for b in case.buses:
        p.add_constraint(balance[b.id], mp.EQ, load[b.id], f"balance[{b.id},{tag}]")

    for k in case.lines:
        flow = {f[k.id]: 1.0, theta[k.from_bus]: -k.susceptance, theta[k.to_bus]: k.susceptance}
        if not k.is_candidate:
            p.add_constraint(flow, mp.EQ, 0.0, f"flow[{k.id},{tag}]")
            p.add_constraint({f[k.id]: 1.0}, mp.LE, k.capacity_mw, f"fmax[{k.id},{tag}]")
            p.add_constraint({f[k.id]: 1.0}, mp.GE, -k.capacity_mw, f"fmin[{k.id},{tag}]")
            continue
        # disjunctive form of f = x̃ b (θo - θr); the angle spread is at most 2π
        big_m = 2.0 * math.pi * k.susceptance
        s = xs[k.id, t]
        p.add_constraint({**flow, s: big_m}, mp.LE, big_m, f"flow_hi[{k.id},{tag}]")
        p.add_constraint({**flow, s: -big_m}, mp.GE, -big_m, f"flow_lo[{k.id},{tag}]")
        p.add_constraint({f[k.id]: 1.0, s: -k.capacity_mw}, mp.LE, 0.0, f"fmax[{k.id},{tag}]")
        p.add_constraint({f[k.id]: 1.0, s: k.capacity_mw}, mp.GE, 0.0, f"fmin[{k.id},{tag}]")

    p.add_constraint({theta[slack]: 1.0}, mp.EQ, 0.0, f"slack_angle[{tag}]")
    for b in case.buses:
        if b.id != slack:
            p.add_constraint({theta[b.id]: 1.0}, mp.LE, math.pi, f"theta_max[{b.id},{tag}]")
            p.add_constraint({theta[b.id]: 1.0}, mp.GE, -math.pi, f"theta_min[{b.id},{tag}]")

    for i in case.generators:
        cap = u.u_gen[i.id]
        if i.is_candidate:
            p.add_constraint({g[i.id]: 1.0, ys[i.id, t]: -cap}, mp.LE, 0.0, f"gcap[{i.id},{tag}]")
        else:
            p.add_constraint({g[i.id]: 1.0}, mp.LE, cap * fixed_gens[i.id], f"gcap[{i.id},{tag}]")
    for j in case.demands:
        p.add_constraint({r[j.id]: 1.0}, mp.LE, j.shed_fraction[t - 1] * u.u_dem[j.id], f"shedcap[{j.id},{tag}]")

    sigma = cfg.sigma_hours
    cut = {gamma_t: 1.0}
    for i in case.generators:
        cut[g[i.id]] = -sigma * i.op_cost / MEUR
    for j in case.demands:
        cut[r[j.id]] = -sigma * j.shed_cost / MEUR

    threshold = gamma_g_threshold(cfg, u.n_gen_deviations)
    if threshold is None:
        raise MasterError(f"scenario {tag} has more generator deviations than any plan admits")
    if threshold == 0 or not case.candidate_generators:
        p.add_constraint(cut, mp.GE, 0.0, f"cut[{tag}]")
        return
    # the scenario applies only if enough new generators are active for its deviation count
    act = p.add_var(f"act[{tag}]", 0, 1, binary=True)
    n_cand = len(case.candidate_generators)
    row = {ys[i.id, t]: 1.0 for i in case.candidate_generators}
    row[act] = -float(n_cand)
    p.add_constraint(row, mp.LE, threshold - 1.0, f"activate[{tag}]")
    relax = sum(sigma * j.shed_cost * u.u_dem[j.id] for j in case.demands) / MEUR
    relax += sum(sigma * i.op_cost * u.u_gen[i.id] for i in case.generators) / MEUR
    if relax > 0:
        cut[act] = -relax
        p.add_constraint(cut, mp.GE, -relax, f"cut[{tag}]")


def solve_master(master: MasterProgram, backend: str | None = None) -> MasterSolution:
    case = master.case
    cfg = case.planning
    out = mp.solve(master.program, backend)
    if out.status is mp.Status.INFEASIBLE:
        raise MasterError("master problem infeasible: the budgets cannot accommodate the first-stage rules")
    if not out.optimal:
        raise MasterError(f"master problem ended with status {out.status.value}")

    ny = cfg.horizon_years
    lines = {k.id: tuple(int(round(out.x[master.line_build[k.id, t]])) for t in range(1, ny + 1))
             for k in case.candidate_lines}
    gens = {i.id: tuple(int(round(out.x[master.gen_build[i.id, t]])) for t in range(1, ny + 1))
            for i in case.candidate_generators}
    plan = InvestmentPlan(lines, gens)
    check_plan(plan, case)
    bad = phasing_violations(plan, case)
    if bad:
        raise MasterError("master returned a plan breaking phased order: " + "; ".join(bad))
    line_npc, gen_npc = investment_npc(plan, case)
    tol = 1e-7
    if line_npc > cfg.line_budget + tol * max(1.0, cfg.line_budget) or gen_npc > cfg.gen_budget + tol * max(
            1.0, cfg.gen_budget):
        raise CaseError("master returned a plan over budget")
    gamma = {t: max(0.0, out.x[c]) * MEUR for t, c in master.gamma.items()}
    return MasterSolution(plan, expand_statuses(plan, case), gamma, out.objective, line_npc, gen_npc, out.nodes)


def deterministic_equivalent(case: NetworkCase, backend: str | None = None) -> MasterSolution:
    """Single MILP with the nominal realization in every period."""
    pool = ScenarioPool()
    for t in case.periods:
        pool.add(nominal_realization(case, t))
    return solve_master(build_master(case, None, pool), backend)
