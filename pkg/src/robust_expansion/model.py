"""Planning-instance types, status bookkeeping and uncertainty arithmetic.

Units: power in MW, investment costs and budgets in millions of euros (M€),
operating and load-shedding costs in €/MWh. Susceptances are positive
magnitudes in MW/rad so that a line flow is ``b * (theta_from - theta_to)``.
"""

from __future__ import annotations

import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from functools import cached_property

MEUR = 1e6  # euros per M€

FIXED = "fixed"
CANDIDATE = "candidate_independent"
PHASED = "candidate_phased"
DISMANTLED = "dismantled"
GEN_CATEGORIES = (FIXED, CANDIDATE, PHASED, DISMANTLED)

EXISTING = "existing"
LINE_CANDIDATE = "candidate"

DEFAULT_GAMMA_G_STEPS = ((1, 1), (3, 2), (5, 3))


class CaseError(ValueError):
    """The case, plan or realization violates a modelling invariant."""


@dataclass(frozen=True)
class Bus:
    id: str
    is_slack: bool = False


@dataclass(frozen=True)
class Line:
    id: str
    from_bus: str
    to_bus: str
    susceptance: float
    capacity_mw: float
    status: str = EXISTING
    invest_cost: float | None = None

    @property
    def is_candidate(self) -> bool:
        return self.status == LINE_CANDIDATE


@dataclass(frozen=True)
class Generator:
    id: str
    bus: str
    op_cost: float
    cap_nominal_mw: float
    cap_deviation_mw: float = 0.0
    category: str = FIXED
    invest_cost: float | None = None
    group_id: str | None = None
    phase_order: int | None = None
    dismantle_period: int | None = None

    @property
    def is_candidate(self) -> bool:
        return self.category in (CANDIDATE, PHASED)


@dataclass(frozen=True)
class GeneratorGroup:
    group_id: str
    members: tuple[str, ...]


@dataclass(frozen=True)
class Demand:
    id: str
    bus: str
    load_nominal_mw: float
    load_deviation_mw: float
    shed_cost: float
    shed_fraction: tuple[float, ...]
    growth_mean: tuple[float, ...]
    growth_dispersion: tuple[float, ...]


def geometric_growth(rate: float, periods: int) -> tuple[float, ...]:
    """Per-period factors ``(1 + rate) ** (t - 1)`` for ``t = 1..periods``."""
    return tuple((1.0 + rate) ** (t - 1) for t in range(1, periods + 1))


@dataclass(frozen=True)
class PlanningConfig:
    horizon_years: int
    discount_rate: float
    sigma_hours: float
    line_budget: float
    gen_budget: float
    gamma_d: int
    gamma_g_base: int
    gamma_g_steps: tuple[tuple[int, int], ...] = DEFAULT_GAMMA_G_STEPS


@dataclass(frozen=True)
class CCGSettings:
    epsilon: float = 1e-6
    max_iterations: int = 50


@dataclass(frozen=True)
class NetworkCase:
    name: str
    buses: tuple[Bus, ...]
    lines: tuple[Line, ...]
    generators: tuple[Generator, ...]
    demands: tuple[Demand, ...]
    planning: PlanningConfig
    generator_groups: tuple[GeneratorGroup, ...] = ()
    ccg: CCGSettings | None = None
    notes: str = ""

    @cached_property
    def slack_bus(self) -> str:
        return next(b.id for b in self.buses if b.is_slack)

    @cached_property
    def candidate_lines(self) -> tuple[Line, ...]:
        return tuple(k for k in self.lines if k.is_candidate)

    @cached_property
    def candidate_generators(self) -> tuple[Generator, ...]:
        return tuple(g for g in self.generators if g.is_candidate)

    @cached_property
    def periods(self) -> range:
        return range(1, self.planning.horizon_years + 1)

    @cached_property
    def groups(self) -> dict[str, tuple[Generator, ...]]:
        """Phased members ordered by phase."""
        by_id = {g.id: g for g in self.generators}
        out = {}
        for grp in self.generator_groups:
            members = [by_id[i] for i in grp.members]
            out[grp.group_id] = tuple(sorted(members, key=lambda g: g.phase_order))
        return out


# -- validation -------------------------------------------------------------


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok


def validate_case(case: NetworkCase) -> ValidationReport:
    v: list[str] = []
    cfg = case.planning
    ny = cfg.horizon_years

    if not isinstance(ny, int) or ny < 1:
        v.append(f"planning.horizon_years must be an integer >= 1, got {ny!r}")
        ny = 1
    if cfg.discount_rate < 0:
        v.append("planning.discount_rate must be >= 0")
    if not cfg.sigma_hours > 0:
        v.append("planning.sigma_hours must be > 0")
    if cfg.line_budget < 0 or cfg.gen_budget < 0:
        v.append("planning budgets must be >= 0")
    for label, val in (("gamma_d", cfg.gamma_d), ("gamma_g_base", cfg.gamma_g_base)):
        if not isinstance(val, int) or val < 0:
            v.append(f"planning.{label} must be an integer >= 0")
    if isinstance(cfg.gamma_d, int) and cfg.gamma_d > len(case.demands):
        v.append(f"planning.gamma_d={cfg.gamma_d} exceeds the number of demands ({len(case.demands)})")
    thresholds = [s[0] for s in cfg.gamma_g_steps]
    increments = [s[1] for s in cfg.gamma_g_steps]
    if any(b <= a for a, b in zip(thresholds, thresholds[1:])):
        v.append("planning.gamma_g_steps thresholds must be strictly increasing")
    if any(t < 1 for t in thresholds) or any(i < 0 for i in increments):
        v.append("planning.gamma_g_steps thresholds must be >= 1 and increments >= 0")
    if any(b < a for a, b in zip(increments, increments[1:])):
        v.append("planning.gamma_g_steps increments must be nondecreasing")

    bus_ids = [b.id for b in case.buses]
    _duplicates(v, "bus", bus_ids)
    buses = set(bus_ids)
    n_slack = sum(b.is_slack for b in case.buses)
    if n_slack == 0:
        v.append("no slack bus")
    elif n_slack > 1:
        v.append("multiple slack buses")

    _duplicates(v, "line", [k.id for k in case.lines])
    for k in case.lines:
        where = f"line {k.id}"
        for end in (k.from_bus, k.to_bus):
            if end not in buses:
                v.append(f"{where}: dangling bus id {end!r}")
        if k.from_bus == k.to_bus:
            v.append(f"{where}: from_bus equals to_bus")
        if not k.capacity_mw > 0:
            v.append(f"{where}: capacity_mw must be > 0")
        if not k.susceptance > 0:
            v.append(f"{where}: susceptance must be > 0")
        if k.status not in (EXISTING, LINE_CANDIDATE):
            v.append(f"{where}: unknown status {k.status!r}")
        if k.is_candidate and (k.invest_cost is None or k.invest_cost < 0):
            v.append(f"{where}: candidate line needs invest_cost >= 0")

    _duplicates(v, "generator", [g.id for g in case.generators])
    group_ids = {grp.group_id for grp in case.generator_groups}
    for g in case.generators:
        where = f"generator {g.id}"
        if g.bus not in buses:
            v.append(f"{where}: dangling bus id {g.bus!r}")
        if g.category not in GEN_CATEGORIES:
            v.append(f"{where}: unknown category {g.category!r}")
        if g.cap_nominal_mw < 0:
            v.append(f"{where}: cap_nominal_mw must be >= 0")
        if not 0 <= g.cap_deviation_mw <= g.cap_nominal_mw:
            v.append(f"{where}: cap_deviation_mw must lie in [0, cap_nominal_mw]")
        if g.op_cost < 0:
            v.append(f"{where}: op_cost must be >= 0")
        if g.is_candidate and (g.invest_cost is None or g.invest_cost < 0):
            v.append(f"{where}: candidate generator needs invest_cost >= 0")
        if g.category == DISMANTLED:
            tp = g.dismantle_period
            if not isinstance(tp, int) or not 1 <= tp <= ny:
                v.append(f"{where}: dismantle period {tp!r} out of range 1..{ny}")
        if g.category == PHASED:
            if g.group_id not in group_ids:
                v.append(f"{where}: phased generator references unknown group {g.group_id!r}")
            if not isinstance(g.phase_order, int):
                v.append(f"{where}: phased generator needs an integer phase_order")
        elif g.group_id is not None:
            v.append(f"{where}: only candidate_phased generators may belong to a group")

    gens = {g.id: g for g in case.generators}
    _duplicates(v, "generator group", [grp.group_id for grp in case.generator_groups])
    for grp in case.generator_groups:
        where = f"group {grp.group_id}"
        members = [gens.get(i) for i in grp.members]
        if any(m is None for m in members):
            v.append(f"{where}: unknown member generator")
            continue
        if any(m.category != PHASED or m.group_id != grp.group_id for m in members):
            v.append(f"{where}: members must be candidate_phased generators of this group")
            continue
        orders = [m.phase_order for m in members]
        if sorted(orders) != list(range(1, len(members) + 1)):
            v.append(f"{where}: non-contiguous phases {sorted(orders)}")
        elif orders != sorted(orders):
            v.append(f"{where}: members must be listed by phase_order")
        listed = set(grp.members)
        stray = [g.id for g in case.generators if g.group_id == grp.group_id and g.id not in listed]
        if stray:
            v.append(f"{where}: generators {stray} claim the group but are not members")

    _duplicates(v, "demand", [d.id for d in case.demands])
    for d in case.demands:
        where = f"demand {d.id}"
        if d.bus not in buses:
            v.append(f"{where}: dangling bus id {d.bus!r}")
        if d.load_nominal_mw < 0 or d.load_deviation_mw < 0:
            v.append(f"{where}: loads must be >= 0")
        if d.shed_cost < 0:
            v.append(f"{where}: shed_cost must be >= 0")
        for label, seq in (
            ("shed_fraction", d.shed_fraction),
            ("growth_mean", d.growth_mean),
            ("growth_dispersion", d.growth_dispersion),
        ):
            if len(seq) != ny:
                v.append(f"{where}: {label} needs {ny} entries, got {len(seq)}")
        if any(not 0 <= e <= 1 for e in d.shed_fraction):
            v.append(f"{where}: shed_fraction entries must lie in [0, 1]")
        if any(not h > 0 for h in d.growth_mean + d.growth_dispersion):
            v.append(f"{where}: growth factors must be > 0")

    return ValidationReport(tuple(v))


def _duplicates(v: list[str], kind: str, ids: Sequence[str]) -> None:
    seen: set[str] = set()
    for i in ids:
        if i in seen:
            v.append(f"duplicate {kind} id {i!r}")
        seen.add(i)


def ensure_valid(case: NetworkCase) -> NetworkCase:
    """Raise :class:`CaseError` unless ``case`` validates (result is memoised)."""
    if case.__dict__.get("_validated"):
        return case
    report = validate_case(case)
    if not report.ok:
        raise CaseError("invalid case: " + "; ".join(report.violations))
    case.__dict__["_validated"] = True
    return case


# -- investment plans and statuses -------------------------------------------


@dataclass(frozen=True)
class InvestmentPlan:
    """Binary build decisions per candidate asset and period (1-based)."""

    line_build: Mapping[str, tuple[int, ...]] = field(default_factory=dict)
    gen_build: Mapping[str, tuple[int, ...]] = field(default_factory=dict)

    @classmethod
    def from_periods(cls, case: NetworkCase, lines: Mapping[str, int] | None = None,
                     gens: Mapping[str, int] | None = None) -> "InvestmentPlan":
        ny = case.planning.horizon_years

        def vec(t: int | None) -> tuple[int, ...]:
            return tuple(int(t == p) for p in range(1, ny + 1))

        lines = lines or {}
        gens = gens or {}
        return cls(
            {k.id: vec(lines.get(k.id)) for k in case.candidate_lines},
            {g.id: vec(gens.get(g.id)) for g in case.candidate_generators},
        )

    @classmethod
    def empty(cls, case: NetworkCase) -> "InvestmentPlan":
        return cls.from_periods(case)

    def line_period(self, line_id: str) -> int | None:
        return _first_build(self.line_build.get(line_id, ()))

    def gen_period(self, gen_id: str) -> int | None:
        return _first_build(self.gen_build.get(gen_id, ()))

    def build_periods(self) -> tuple[dict[str, int], dict[str, int]]:
        lines = {k: p for k in self.line_build if (p := self.line_period(k)) is not None}
        gens = {g: p for g in self.gen_build if (p := self.gen_period(g)) is not None}
        return lines, gens

    def key(self) -> tuple:
        return (tuple(sorted(self.line_build.items())), tuple(sorted(self.gen_build.items())))


def _first_build(vec: Sequence[int]) -> int | None:
    for t, b in enumerate(vec, start=1):
        if b:
            return t
    return None


@dataclass(frozen=True)
class StatusSchedule:
    line_status: Mapping[str, tuple[int, ...]]
    gen_status: Mapping[str, tuple[int, ...]]

    def lines_at(self, t: int) -> dict[str, int]:
        return {k: s[t - 1] for k, s in self.line_status.items()}

    def gens_at(self, t: int) -> dict[str, int]:
        return {g: s[t - 1] for g, s in self.gen_status.items()}


def check_plan(plan: InvestmentPlan, case: NetworkCase) -> None:
    ny = case.planning.horizon_years
    cand_lines = {k.id for k in case.candidate_lines}
    cand_gens = {g.id for g in case.candidate_generators}
    for kind, builds, allowed in (("line", plan.line_build, cand_lines), ("generator", plan.gen_build, cand_gens)):
        for asset, vec in builds.items():
            if asset not in allowed:
                raise CaseError(f"plan builds unknown candidate {kind} {asset!r}")
            if len(vec) != ny or any(b not in (0, 1) for b in vec):
                raise CaseError(f"plan entry for {kind} {asset!r} must be {ny} binary values")
            if sum(vec) > 1:
                raise CaseError(f"{kind} {asset!r} is built more than once")


def phasing_violations(plan: InvestmentPlan, case: NetworkCase) -> list[str]:
    """Phased groups must start strictly one after another, in phase order."""
    out = []
    for gid, members in case.groups.items():
        for prev, nxt in zip(members, members[1:]):
            a, b = plan.gen_period(prev.id), plan.gen_period(nxt.id)
            if b is not None and (a is None or a >= b):
                out.append(f"group {gid}: {nxt.id} starts at {b} but {prev.id} starts at {a}")
    return out


def expand_statuses(plan: InvestmentPlan, case: NetworkCase) -> StatusSchedule:
    ensure_valid(case)
    check_plan(plan, case)
    ny = case.planning.horizon_years

    def cumulative(vec: Sequence[int]) -> tuple[int, ...]:
        out, acc = [], 0
        for b in vec:
            acc += b
            out.append(acc)
        return tuple(out)

    lines = {}
    for k in case.lines:
        if k.is_candidate:
            lines[k.id] = cumulative(plan.line_build.get(k.id, (0,) * ny))
        else:
            lines[k.id] = (1,) * ny
    gens = {}
    for g in case.generators:
        if g.category == DISMANTLED:
            gens[g.id] = tuple(int(t <= g.dismantle_period) for t in range(1, ny + 1))
        elif g.is_candidate:
            gens[g.id] = cumulative(plan.gen_build.get(g.id, (0,) * ny))
        else:
            gens[g.id] = (1,) * ny
    return StatusSchedule(lines, gens)


# -- money -------------------------------------------------------------------


def discount_factor(rate: float, t: int) -> float:
    """Present-value factor ``1 / (1 + rate) ** (t - 1)`` for period ``t >= 1``."""
    if t < 1:
        raise ValueError(f"period must be >= 1, got {t}")
    return 1.0 / (1.0 + rate) ** (t - 1)


def operational_weight(rate: float, t: int) -> float:
    """Weight of period-``t`` operating cost in the net present cost.

    Operating costs are incurred over the year, so they carry one more
    discount step than investments made at its start.
    """
    return discount_factor(rate, t) / (1.0 + rate)


# -- uncertainty ---------------------------------------------------------------


def gamma_g_budget(config: PlanningConfig, n_new_active: int) -> int:
    """Generation uncertainty budget given the number of active new generators."""
    if n_new_active < 0:
        raise ValueError("n_new_active must be >= 0")
    inc = 0
    for threshold, increment in config.gamma_g_steps:
        if threshold <= n_new_active:
            inc = increment
    return config.gamma_g_base + inc


def gamma_g_threshold(config: PlanningConfig, budget_needed: int) -> int | None:
    """Smallest count of new active generators whose budget reaches ``budget_needed``."""
    if config.gamma_g_base >= budget_needed:
        return 0
    for threshold, increment in config.gamma_g_steps:
        if config.gamma_g_base + increment >= budget_needed:
            return threshold
    return None


def count_new_active(case: NetworkCase, gen_status_t: Mapping[str, int]) -> int:
    return sum(gen_status_t[g.id] for g in case.candidate_generators)


@dataclass(frozen=True)
class UncertaintyRealization:
    period: int
    z_gen: Mapping[str, int]
    z_dem: Mapping[str, int]
    u_gen: Mapping[str, float]
    u_dem: Mapping[str, float]

    def key(self) -> tuple:
        return (self.period, tuple(sorted(self.z_gen.items())), tuple(sorted(self.z_dem.items())))

    @property
    def n_gen_deviations(self) -> int:
        return sum(self.z_gen.values())


def realize_uncertainty(
    case: NetworkCase,
    gen_status_t: Mapping[str, int],
    z_gen: Mapping[str, int],
    z_dem: Mapping[str, int],
    t: int,
    config: PlanningConfig | None = None,
) -> UncertaintyRealization:
    """Materialise capacities and loads for the deviation pattern ``(z_gen, z_dem)``.

    Missing entries in ``z_gen`` / ``z_dem`` are read as 0.
    """
    cfg = config or case.planning
    if not 1 <= t <= cfg.horizon_years:
        raise CaseError(f"period {t} outside 1..{cfg.horizon_years}")
    zg = {g.id: int(z_gen.get(g.id, 0)) for g in case.generators}
    zd = {d.id: int(z_dem.get(d.id, 0)) for d in case.demands}
    unknown = (set(z_gen) - set(zg)) | (set(z_dem) - set(zd))
    if unknown:
        raise CaseError(f"deviation indicators for unknown assets {sorted(unknown)}")
    if any(z not in (0, 1) for z in (*zg.values(), *zd.values())):
        raise CaseError("deviation indicators must be binary")
    for g in case.generators:
        if zg[g.id] > gen_status_t[g.id]:
            raise CaseError(f"generator {g.id} is inactive in period {t} and cannot deviate")
    budget = gamma_g_budget(cfg, count_new_active(case, gen_status_t))
    if sum(zg.values()) > budget:
        raise CaseError(f"{sum(zg.values())} generator deviations exceed budget {budget}")
    if sum(zd.values()) > cfg.gamma_d:
        raise CaseError(f"{sum(zd.values())} demand deviations exceed budget {cfg.gamma_d}")
    return _materialise(case, zg, zd, t)


def _materialise(case: NetworkCase, zg: Mapping[str, int], zd: Mapping[str, int], t: int) -> UncertaintyRealization:
    u_gen = {g.id: g.cap_nominal_mw - g.cap_deviation_mw * zg[g.id] for g in case.generators}
    u_dem = {
        d.id: d.load_nominal_mw * d.growth_mean[t - 1] + d.load_deviation_mw * d.growth_dispersion[t - 1] * zd[d.id]
        for d in case.demands
    }
    assert all(u >= 0 for u in u_gen.values()) and all(u >= 0 for u in u_dem.values())
    return UncertaintyRealization(t, dict(zg), dict(zd), u_gen, u_dem)


def nominal_realization(case: NetworkCase, t: int) -> UncertaintyRealization:
    return _materialise(case, {g.id: 0 for g in case.generators}, {d.id: 0 for d in case.demands}, t)


def investment_by_period(plan: InvestmentPlan, case: NetworkCase) -> list[tuple[float, float]]:
    """Undiscounted (line, generator) spend in M€ for each period."""
    line_cost = {k.id: k.invest_cost for k in case.candidate_lines}
    gen_cost = {g.id: g.invest_cost for g in case.candidate_generators}
    out = []
    for t in case.periods:
        lines = sum(line_cost[k] * vec[t - 1] for k, vec in plan.line_build.items())
        gens = sum(gen_cost[g] * vec[t - 1] for g, vec in plan.gen_build.items())
        out.append((lines, gens))
    return out


def investment_npc(plan: InvestmentPlan, case: NetworkCase, config: PlanningConfig | None = None) -> tuple[float, float]:
    """Discounted (line, generator) investment in M€, the quantities the budgets cap."""
    cfg = config or case.planning
    lines = gens = 0.0
    for t, (lc, gc) in enumerate(investment_by_period(plan, case), start=1):
        df = discount_factor(cfg.discount_rate, t)
        lines += df * lc
        gens += df * gc
    return lines, gens
