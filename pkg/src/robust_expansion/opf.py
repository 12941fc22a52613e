"""Per-period DC optimal power flow with load shedding.

For fixed asset statuses and a fixed uncertainty realization this is the
innermost operational problem. Costs are σ-weighted and undiscounted (€);
discounting is applied by :func:`evaluate_plan` and the decomposition.
"""

from __future__ import annotations

import math
from collections.abc import Mapping
from dataclasses import dataclass

from . import mp
from .model import (
    MEUR,
    CaseError,
    InvestmentPlan,
    NetworkCase,
    StatusSchedule,
    UncertaintyRealization,
    discount_factor,
    ensure_valid,
    expand_statuses,
    investment_by_period,
    investment_npc,
    nominal_realization,
    operational_weight,
)

DUALITY_TOL = 1e-7
SIGN_TOL = 1e-6


class OPFInfeasible(RuntimeError):
    def __init__(self, period: int, rows: list[str]):
        super().__init__(f"operational problem infeasible in period {period}; violated: {', '.join(rows) or '?'}")
        self.period = period
        self.rows = rows


@dataclass(frozen=True)
class Dispatch:
    gen_mw: dict[str, float]
    demand_mw: dict[str, float]
    shed_mw: dict[str, float]
    angle_rad: dict[str, float]
    flow_mw: dict[str, float]


@dataclass(frozen=True)
class DualSolution:
    lam: dict[str, float]  # nodal balance, per bus
    phi: dict[str, float]  # flow definition, per built line
    chi: float  # slack angle
    phi_hat: dict[str, float]  # upper flow limit (<= 0)
    phi_check: dict[str, float]  # lower flow limit (>= 0)
    xi_hat: dict[str, float]  # upper angle limit (<= 0)
    xi_check: dict[str, float]  # lower angle limit (>= 0)
    alpha_d: dict[str, float]  # demand fixing
    varphi_g: dict[str, float]  # generation cap (<= 0)
    varphi_d: dict[str, float]  # shed cap (<= 0)


@dataclass(frozen=True)
class OPFProgram:
    program: mp.MathProgram
    case: NetworkCase
    line_on: Mapping[str, int]
    gen_on: Mapping[str, int]
    realization: UncertaintyRealization

    @property
    def period(self) -> int:
        return self.realization.period


@dataclass(frozen=True)
class OPFResult:
    dispatch: Dispatch
    duals: DualSolution
    cost: float  # €, σ-weighted
    shed_cost: float  # € part of ``cost`` due to shedding


def build_opf(case: NetworkCase, statuses: StatusSchedule, realization: UncertaintyRealization) -> OPFProgram:
    """Assemble the operational LP for ``realization.period``."""
    ensure_valid(case)
    t = realization.period
    line_on = statuses.lines_at(t)
    gen_on = statuses.gens_at(t)
    sigma = case.planning.sigma_hours
    slack = case.slack_bus

    p = mp.MathProgram(f"opf[t={t}]")
    g = {i.id: p.add_var(f"g[{i.id}]", 0.0) for i in case.generators}
    dem = {j.id: p.add_var(f"p[{j.id}]", 0.0) for j in case.demands}
    r = {j.id: p.add_var(f"r[{j.id}]", 0.0) for j in case.demands}
    theta = {b.id: p.add_var(f"theta[{b.id}]", -mp.INF) for b in case.buses}
    built = [k for k in case.lines if line_on[k.id]]
    f = {k.id: p.add_var(f"f[{k.id}]", -mp.INF) for k in built}

    p.set_objective(
        {**{g[i.id]: sigma * i.op_cost for i in case.generators}, **{r[j.id]: sigma * j.shed_cost for j in case.demands}}
    )

    balance: dict[str, dict[int, float]] = {b.id: {} for b in case.buses}
    for i in case.generators:
        balance[i.bus][g[i.id]] = 1.0
    for j in case.demands:
        balance[j.bus][r[j.id]] = 1.0
        balance[j.bus][dem[j.id]] = -1.0
    for k in built:
        balance[k.from_bus][f[k.id]] = balance[k.from_bus].get(f[k.id], 0.0) - 1.0
        balance[k.to_bus][f[k.id]] = balance[k.to_bus].get(f[k.id], 0.0) + 1.0
    for b in case.buses:
        p.add_constraint(balance[b.id], mp.EQ, 0.0, f"balance[{b.id}]")

    for k in built:
        p.add_constraint(
            {f[k.id]: 1.0, theta[k.from_bus]: -k.susceptance, theta[k.to_bus]: k.susceptance},
            mp.EQ,
            0.0,
            f"flow[{k.id}]",
        )
    p.add_constraint({theta[slack]: 1.0}, mp.EQ, 0.0, "slack_angle")
    for k in built:
        p.add_constraint({f[k.id]: 1.0}, mp.LE, k.capacity_mw, f"fmax[{k.id}]")
        p.add_constraint({f[k.id]: 1.0}, mp.GE, -k.capacity_mw, f"fmin[{k.id}]")
    for b in case.buses:
        if b.id == slack:
            continue
        p.add_constraint({theta[b.id]: 1.0}, mp.LE, math.pi, f"theta_max[{b.id}]")
        p.add_constraint({theta[b.id]: 1.0}, mp.GE, -math.pi, f"theta_min[{b.id}]")
    for j in case.demands:
        p.add_constraint({dem[j.id]: 1.0}, mp.EQ, realization.u_dem[j.id], f"demand[{j.id}]")
    for i in case.generators:
        p.add_constraint({g[i.id]: 1.0}, mp.LE, realization.u_gen[i.id] * gen_on[i.id], f"gcap[{i.id}]")
    for j in case.demands:
        cap = j.shed_fraction[t - 1] * realization.u_dem[j.id]
        p.add_constraint({r[j.id]: 1.0}, mp.LE, cap, f"shedcap[{j.id}]")

    return OPFProgram(p, case, line_on, gen_on, realization)


def solve_opf(opf: OPFProgram, backend: str | None = None) -> OPFResult:
    """Solve, extract dispatch and duals, and confirm strong duality."""
    p, case = opf.program, opf.case
    out = mp.solve(p, backend)
    if out.status is mp.Status.INFEASIBLE:
        raise OPFInfeasible(opf.period, out.infeasible_rows)
    if not out.optimal:
        raise RuntimeError(f"operational LP for period {opf.period} ended with status {out.status.value}")

    built = [k for k in case.lines if opf.line_on[k.id]]
    non_slack = [b.id for b in case.buses if b.id != case.slack_bus]
    dispatch = Dispatch(
        gen_mw={i.id: out.value(f"g[{i.id}]") for i in case.generators},
        demand_mw={j.id: out.value(f"p[{j.id}]") for j in case.demands},
        shed_mw={j.id: out.value(f"r[{j.id}]") for j in case.demands},
        angle_rad={b.id: out.value(f"theta[{b.id}]") for b in case.buses},
        flow_mw={k.id: (out.value(f"f[{k.id}]") if opf.line_on[k.id] else 0.0) for k in case.lines},
    )
    duals = DualSolution(
        lam={b.id: out.dual(f"balance[{b.id}]") for b in case.buses},
        phi={k.id: out.dual(f"flow[{k.id}]") for k in built},
        chi=out.dual("slack_angle"),
        phi_hat={k.id: out.dual(f"fmax[{k.id}]") for k in built},
        phi_check={k.id: out.dual(f"fmin[{k.id}]") for k in built},
        xi_hat={n: out.dual(f"theta_max[{n}]") for n in non_slack},
        xi_check={n: out.dual(f"theta_min[{n}]") for n in non_slack},
        alpha_d={j.id: out.dual(f"demand[{j.id}]") for j in case.demands},
        varphi_g={i.id: out.dual(f"gcap[{i.id}]") for i in case.generators},
        varphi_d={j.id: out.dual(f"shedcap[{j.id}]") for j in case.demands},
    )
    cost = out.objective
    scale = max(1.0, abs(cost))
    _check_signs(duals, SIGN_TOL * scale)
    dual_obj = dual_objective(opf, duals)
    if abs(dual_obj - cost) > DUALITY_TOL * scale:
        raise RuntimeError(f"strong duality violated in period {opf.period}: primal {cost} vs dual {dual_obj}")
    sigma = case.planning.sigma_hours
    shed = sum(sigma * j.shed_cost * dispatch.shed_mw[j.id] for j in case.demands)
    return OPFResult(dispatch, duals, cost, shed)


def _check_signs(d: DualSolution, tol: float) -> None:
    nonpos = [*d.phi_hat.values(), *d.xi_hat.values(), *d.varphi_g.values(), *d.varphi_d.values()]
    nonneg = [*d.phi_check.values(), *d.xi_check.values()]
    if any(v > tol for v in nonpos) or any(v < -tol for v in nonneg):
        raise RuntimeError("dual sign convention violated")


def dual_objective(opf: OPFProgram, d: DualSolution) -> float:
    """Objective of the dual operational problem evaluated at ``d``."""
    case, u = opf.case, opf.realization
    t = opf.period
    total = sum(k.capacity_mw * (d.phi_hat[k.id] - d.phi_check[k.id]) for k in case.lines if k.id in d.phi_hat)
    total += math.pi * sum(d.xi_hat[n] - d.xi_check[n] for n in d.xi_hat)
    total += sum(u.u_gen[i.id] * opf.gen_on[i.id] * d.varphi_g[i.id] for i in case.generators)
    for j in case.demands:
        total += u.u_dem[j.id] * d.alpha_d[j.id] + j.shed_fraction[t - 1] * u.u_dem[j.id] * d.varphi_d[j.id]
    return total


def operating_cost(case: NetworkCase, statuses: StatusSchedule, realization: UncertaintyRealization,
                   backend: str | None = None) -> float:
    """σ-weighted cost (€) of the optimal dispatch; ``inf`` if no dispatch exists."""
    try:
        return solve_opf(build_opf(case, statuses, realization), backend).cost
    except OPFInfeasible:
        return math.inf


# -- whole-plan evaluation ------------------------------------------------------


@dataclass(frozen=True)
class PeriodCost:
    period: int
    line_invest: float  # M€, undiscounted
    gen_invest: float  # M€, undiscounted
    c_op: float  # €, σ-weighted, undiscounted
    shed_cost: float  # € part of c_op
    discount: float
    op_weight: float


@dataclass(frozen=True)
class PlanEvaluation:
    periods: tuple[PeriodCost, ...]
    line_npc: float  # M€
    gen_npc: float  # M€
    operational_npc: float  # M€
    shedding_npc: float  # M€

    @property
    def investment_npc(self) -> float:
        return self.line_npc + self.gen_npc

    @property
    def total(self) -> float:
        return self.investment_npc + self.operational_npc


def check_budgets(plan: InvestmentPlan, case: NetworkCase, tol: float = 1e-7) -> tuple[float, float]:
    cfg = case.planning
    lines, gens = investment_npc(plan, case)
    if lines > cfg.line_budget + tol * max(1.0, cfg.line_budget):
        raise CaseError(f"line investment {lines:.6f} M€ exceeds budget {cfg.line_budget}")
    if gens > cfg.gen_budget + tol * max(1.0, cfg.gen_budget):
        raise CaseError(f"generation investment {gens:.6f} M€ exceeds budget {cfg.gen_budget}")
    return lines, gens


def evaluate_plan(
    case: NetworkCase,
    plan: InvestmentPlan,
    realizations: Mapping[int, UncertaintyRealization] | None = None,
    backend: str | None = None,
) -> PlanEvaluation:
    """Net present cost of ``plan`` when period ``t`` sees ``realizations[t]``.

    Periods missing from ``realizations`` use the nominal point.
    """
    ensure_valid(case)
    statuses = expand_statuses(plan, case)
    line_npc, gen_npc = check_budgets(plan, case)
    rate = case.planning.discount_rate
    rows = []
    op_npc = shed_npc = 0.0
    for t, (lc, gc) in zip(case.periods, investment_by_period(plan, case)):
        u = (realizations or {}).get(t) or nominal_realization(case, t)
        res = solve_opf(build_opf(case, statuses, u), backend)
        w = operational_weight(rate, t)
        op_npc += w * res.cost / MEUR
        shed_npc += w * res.shed_cost / MEUR
        rows.append(PeriodCost(t, lc, gc, res.cost, res.shed_cost, discount_factor(rate, t), w))
    return PlanEvaluation(tuple(rows), line_npc, gen_npc, op_npc, shed_npc)
