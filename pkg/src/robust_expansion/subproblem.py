"""Per-period worst-case operational problem.

The inner dispatch LP is replaced by its dual, which turns the max-min into a
single maximisation over dual variables and the binary deviation indicators.
Products of a binary indicator and a dual variable are linearised exactly
using finite boxes on the dual variables involved. The boxes are not known to
be valid a priori, so every solve is certified afterwards: the dispatch LP is
re-solved at the returned realization and the two values must agree.

Dual variables are normalised by a currency scale ``S`` so that the program is
well conditioned; the reported cost is in € (σ-weighted, undiscounted).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from . import mp
from .model import (
    NetworkCase,
    PlanningConfig,
    StatusSchedule,
    UncertaintyRealization,
    count_new_active,
    ensure_valid,
    gamma_g_budget,
    realize_uncertainty,
)
from .opf import DualSolution, build_opf, solve_opf

CROSS_CHECK_TOL = 1e-6
INITIAL_SCALE = 2.0
ENLARGE = 10.0
MAX_ENLARGEMENTS = 4
AT_BOUND_TOL = 1e-7


class BigMError(RuntimeError):
    """The linearisation boxes cut off the true worst case."""


class SubproblemError(RuntimeError):
    pass


@dataclass(frozen=True)
class LinearizationBounds:
    """Boxes on dual variables, in €.

    ``lam_abs`` and ``alpha_abs`` bound ``|λ|`` and ``|α^D|``; ``phi_g_lo`` and
    ``phi_d_lo`` are the lower ends of ``φ^G, φ^D ∈ [lo, 0]``. ``flow_abs`` and
    ``angle_abs`` are the derived magnitudes for flow and angle duals; they
    are reported but not imposed, since those duals never multiply a binary.
    """

    lam_abs: float
    alpha_abs: float
    phi_g_lo: float
    phi_d_lo: float
    flow_abs: float
    angle_abs: float

    def scaled(self, factor: float) -> "LinearizationBounds":
        return LinearizationBounds(*(factor * v for v in (
            self.lam_abs, self.alpha_abs, self.phi_g_lo, self.phi_d_lo, self.flow_abs, self.angle_abs)))


def dual_bounds(case: NetworkCase, config: PlanningConfig | None = None, t: int = 1,
                scale: float = 1.0) -> LinearizationBounds:
    cfg = config or case.planning
    sigma = cfg.sigma_hours
    shed = max((j.shed_cost for j in case.demands), default=0.0) if case.demands else 0.0
    gen = max((i.op_cost for i in case.generators), default=0.0)
    lam = sigma * shed
    b_sum = sum(abs(k.susceptance) for k in case.lines)
    base = LinearizationBounds(
        lam_abs=lam,
        alpha_abs=lam,
        phi_g_lo=-sigma * (shed + gen) if case.demands else 0.0,
        phi_d_lo=-lam,
        flow_abs=2.0 * lam,
        angle_abs=2.0 * lam * b_sum,
    )
    return base.scaled(scale) if scale != 1.0 else base


@dataclass(frozen=True)
class DualSubproblem:
    program: mp.MathProgram
    period: int
    scale: float  # € per unit of the normalised objective
    bounds: LinearizationBounds
    gamma_g: int
    gamma_d: int
    z_gen: dict[str, int]  # generator id -> column of z^G
    z_dem: dict[str, int]
    boxed: dict[int, tuple[float, float]]  # column -> artificial (lo, hi), normalised; ±inf where real


def _value_scale(case: NetworkCase, cfg: PlanningConfig) -> float:
    costs = [j.shed_cost for j in case.demands] + [i.op_cost for i in case.generators]
    top = max(costs, default=0.0)
    return cfg.sigma_hours * top if top > 0 else 1.0


def build_dual_subproblem(
    case: NetworkCase,
    statuses: StatusSchedule,
    t: int,
    config: PlanningConfig | None = None,
    bounds: LinearizationBounds | None = None,
) -> DualSubproblem:
    ensure_valid(case)
    cfg = config or case.planning
    bounds = bounds or dual_bounds(case, cfg, t, INITIAL_SCALE)
    S = _value_scale(case, cfg)
    sigma = cfg.sigma_hours
    line_on = statuses.lines_at(t)
    gen_on = statuses.gens_at(t)
    slack = case.slack_bus
    built = [k for k in case.lines if line_on[k.id]]
    active = [i for i in case.generators if gen_on[i.id]]
    gamma_g = gamma_g_budget(cfg, count_new_active(case, gen_on))

    p = mp.MathProgram(f"worst[t={t}]")
    boxed: dict[int, tuple[float, float]] = {}
    lam = {b.id: p.add_var(f"lam[{b.id}]", -mp.INF) for b in case.buses}
    phi = {k.id: p.add_var(f"phi[{k.id}]", -mp.INF) for k in built}
    chi = p.add_var("chi", -mp.INF)
    phi_hat = {k.id: p.add_var(f"phi_hat[{k.id}]", -mp.INF, 0.0) for k in built}
    phi_check = {k.id: p.add_var(f"phi_check[{k.id}]", 0.0) for k in built}
    non_slack = [b.id for b in case.buses if b.id != slack]
    xi_hat = {n: p.add_var(f"xi_hat[{n}]", -mp.INF, 0.0) for n in non_slack}
    xi_check = {n: p.add_var(f"xi_check[{n}]", 0.0) for n in non_slack}

    obj: dict[int, float] = {}
    for k in built:
        obj[phi_hat[k.id]] = k.capacity_mw
        obj[phi_check[k.id]] = -k.capacity_mw
    for n in non_slack:
        obj[xi_hat[n]] = math.pi
        obj[xi_check[n]] = -math.pi

    def product(name: str, z: int, y: int, lo: float, hi: float) -> int:
        # w = z * y with y in [lo, hi], z binary
        w = p.add_var(name, min(lo, 0.0), max(hi, 0.0))
        p.add_constraint({w: 1.0, z: -lo}, mp.GE, 0.0, f"{name}:lo")
        p.add_constraint({w: 1.0, z: -hi}, mp.LE, 0.0, f"{name}:hi")
        p.add_constraint({w: 1.0, y: -1.0, z: -hi}, mp.GE, -hi, f"{name}:ylo")
        p.add_constraint({w: 1.0, y: -1.0, z: -lo}, mp.LE, -lo, f"{name}:yhi")
        return w

    phi_g_lo = bounds.phi_g_lo / S
    alpha_abs = bounds.alpha_abs / S
    phi_d_lo = bounds.phi_d_lo / S

    z_gen: dict[str, int] = {}
    for i in active:
        dev = i.cap_deviation_mw > 0 and gamma_g > 0
        lo = phi_g_lo if dev else -mp.INF
        vg = p.add_var(f"varphi_g[{i.id}]", lo, 0.0)
        p.add_constraint({lam[i.bus]: 1.0, vg: 1.0}, mp.LE, sigma * i.op_cost / S, f"dual_g[{i.id}]")
        obj[vg] = i.cap_nominal_mw
        if dev:
            boxed[vg] = (lo, mp.INF)
            z = z_gen[i.id] = p.add_var(f"zg[{i.id}]", 0.0, 1.0, binary=True)
            w = product(f"w[{i.id}]", z, vg, lo, 0.0)
            obj[w] = -i.cap_deviation_mw

    z_dem: dict[str, int] = {}
    for j in case.demands:
        nominal = j.load_nominal_mw * j.growth_mean[t - 1]
        deviation = j.load_deviation_mw * j.growth_dispersion[t - 1]
        e = j.shed_fraction[t - 1]
        dev = deviation > 0 and cfg.gamma_d > 0
        a_box = alpha_abs if dev else mp.INF
        d_lo = phi_d_lo if dev else -mp.INF
        alpha = p.add_var(f"alpha[{j.id}]", -a_box, a_box)
        vd = p.add_var(f"varphi_d[{j.id}]", d_lo, 0.0)
        p.add_constraint({lam[j.bus]: 1.0, vd: 1.0}, mp.LE, sigma * j.shed_cost / S, f"dual_r[{j.id}]")
        p.add_constraint({lam[j.bus]: -1.0, alpha: 1.0}, mp.LE, 0.0, f"dual_p[{j.id}]")
        obj[alpha] = nominal
        obj[vd] = e * nominal
        if dev:
            boxed[alpha] = (-a_box, a_box)
            boxed[vd] = (d_lo, mp.INF)
            z = z_dem[j.id] = p.add_var(f"zd[{j.id}]", 0.0, 1.0, binary=True)
            v = product(f"v[{j.id}]", z, alpha, -a_box, a_box)
            q = product(f"q[{j.id}]", z, vd, d_lo, 0.0)
            obj[v] = deviation
            obj[q] = e * deviation

    for k in built:
        p.add_constraint(
            {lam[k.to_bus]: 1.0, lam[k.from_bus]: -1.0, phi[k.id]: 1.0, phi_hat[k.id]: 1.0, phi_check[k.id]: 1.0},
            mp.EQ, 0.0, f"dual_f[{k.id}]",
        )
    angle: dict[str, dict[int, float]] = {b.id: {} for b in case.buses}
    for k in built:
        angle[k.from_bus][phi[k.id]] = angle[k.from_bus].get(phi[k.id], 0.0) - k.susceptance
        angle[k.to_bus][phi[k.id]] = angle[k.to_bus].get(phi[k.id], 0.0) + k.susceptance
    angle[slack][chi] = 1.0
    for n in non_slack:
        angle[n][xi_hat[n]] = 1.0
        angle[n][xi_check[n]] = 1.0
    for b in case.buses:
        p.add_constraint(angle[b.id], mp.EQ, 0.0, f"dual_theta[{b.id}]")

    if z_gen:
        p.add_constraint({z: 1.0 for z in z_gen.values()}, mp.LE, gamma_g, "budget_g")
    if z_dem:
        p.add_constraint({z: 1.0 for z in z_dem.values()}, mp.LE, cfg.gamma_d, "budget_d")
    p.set_objective(obj, "max")
    return DualSubproblem(p, t, S, bounds, gamma_g, cfg.gamma_d, z_gen, z_dem, boxed)


@dataclass(frozen=True)
class WorstCase:
    realization: UncertaintyRealization
    c_op: float  # €, σ-weighted, undiscounted
    dual: DualSolution
    shed_cost: float = 0.0
    bound_scale: float = INITIAL_SCALE
    nodes: int = 0


def _at_artificial_bound(sub: DualSubproblem, x) -> list[str]:
    hits = []
    for col, (lo, hi) in sub.boxed.items():
        tol = AT_BOUND_TOL * max(1.0, abs(lo) if math.isfinite(lo) else abs(hi))
        if (math.isfinite(lo) and x[col] <= lo + tol) or (math.isfinite(hi) and x[col] >= hi - tol):
            hits.append(sub.program.variables[col].name)
    return hits


def solve_subproblem(
    case: NetworkCase,
    statuses: StatusSchedule,
    t: int,
    config: PlanningConfig | None = None,
    backend: str | None = None,
) -> WorstCase:
    """Worst-case realization and operating cost for period ``t``, certified against the dispatch LP."""
    cfg = config or case.planning
    factor = INITIAL_SCALE
    previous = None
    for attempt in range(MAX_ENLARGEMENTS + 1):
        bounds = dual_bounds(case, cfg, t, factor)
        sub = build_dual_subproblem(case, statuses, t, cfg, bounds)
        out = mp.solve(sub.program, backend)
        if out.status is mp.Status.UNBOUNDED:
            raise SubproblemError(
                f"period {t}: some realization leaves the dispatch infeasible (shed fraction below 1)")
        if not out.optimal:
            raise SubproblemError(f"period {t}: worst-case MIP ended with status {out.status.value}")
        value = out.objective * sub.scale
        hits = _at_artificial_bound(sub, out.x)
        stable = previous is not None and abs(value - previous) <= CROSS_CHECK_TOL * max(1.0, abs(value))
        if hits and not stable and attempt < MAX_ENLARGEMENTS:
            previous = value
            factor *= ENLARGE
            continue
        break

    z_gen = {i: int(round(out.x[c])) for i, c in sub.z_gen.items()}
    z_dem = {j: int(round(out.x[c])) for j, c in sub.z_dem.items()}
    real = realize_uncertainty(case, statuses.gens_at(t), z_gen, z_dem, t, cfg)
    check = solve_opf(build_opf(case, statuses, real), backend)
    if abs(check.cost - value) > CROSS_CHECK_TOL * max(1.0, abs(check.cost)):
        raise BigMError(
            f"big-M too tight in period {t}: dual value {value:.10g} vs dispatch cost {check.cost:.10g}; "
            f"bounds at {', '.join(hits) or 'none'} (scale {factor:g})"
        )
    if hits and not stable:
        raise BigMError(f"big-M too tight in period {t}: {', '.join(hits)} still at artificial bound")
    return WorstCase(real, check.cost, check.duals, check.shed_cost, factor, out.nodes)


def with_gamma(config: PlanningConfig, gamma_g_base: int | None = None, gamma_d: int | None = None) -> PlanningConfig:
    """Copy of ``config`` with different uncertainty budgets."""
    changes = {}
    if gamma_g_base is not None:
        changes["gamma_g_base"] = gamma_g_base
    if gamma_d is not None:
        changes["gamma_d"] = gamma_d
    return replace(config, **changes)
