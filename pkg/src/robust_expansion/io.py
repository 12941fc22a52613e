"""Case files, plan files and solve reports."""

from __future__ import annotations

import csv
import dataclasses
import json
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

from .model import (
    MEUR,
    Bus,
    CaseError,
    CCGSettings,
    Demand,
    Generator,
    GeneratorGroup,
    InvestmentPlan,
    Line,
    NetworkCase,
    PlanningConfig,
    discount_factor,
    operational_weight,
    validate_case,
)

SCHEMA_VERSION = 1
TOP_LEVEL = ("schema_version", "name", "notes", "buses", "lines", "generators", "generator_groups", "demands",
             "planning", "ccg")
SECTIONS = {
    "buses": ("bus", Bus),
    "lines": ("line", Line),
    "generators": ("generator", Generator),
    "generator_groups": ("group", GeneratorGroup),
    "demands": ("demand", Demand),
}
TUPLE_FIELDS = {"shed_fraction", "growth_mean", "growth_dispersion", "members"}


class CaseFileError(CaseError):
    pass


def bundled_cases() -> list[str]:
    return sorted(p.name for p in resources.files("robust_expansion").joinpath("cases").iterdir()
                  if p.name.endswith(".json"))


def resolve_case_path(name: str | Path) -> Path:
    """A path on disk, or the file name of a bundled case."""
    path = Path(name)
    if path.exists():
        return path
    bundled = resources.files("robust_expansion").joinpath("cases", path.name)
    if bundled.is_file():
        return Path(str(bundled))
    raise CaseFileError(f"case file not found: {name}")


def _build(cls, data: Any, where: str):
    if not isinstance(data, dict):
        raise CaseFileError(f"{where}: expected an object")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - set(fields))
    if unknown:
        raise CaseFileError(f"{where}: unknown field(s) {unknown}")
    missing = [n for n, f in fields.items()
               if n not in data and f.default is dataclasses.MISSING and f.default_factory is dataclasses.MISSING]
    if missing:
        raise CaseFileError(f"{where}: missing field(s) {missing}")
    kwargs = {}
    for name, value in data.items():
        if name in TUPLE_FIELDS or name == "gamma_g_steps":
            if not isinstance(value, list):
                raise CaseFileError(f"{where}.{name}: expected a list")
            value = tuple(tuple(v) if isinstance(v, list) else v for v in value)
        kwargs[name] = value
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise CaseFileError(f"{where}: {exc}") from exc


def case_from_dict(data: Any) -> NetworkCase:
    if not isinstance(data, dict):
        raise CaseFileError("case file: top level must be an object")
    unknown = sorted(set(data) - set(TOP_LEVEL))
    if unknown:
        raise CaseFileError(f"case file: unknown field(s) {unknown}")
    version = data.get("schema_version")
    if version != SCHEMA_VERSION:
        raise CaseFileError(f"schema_version: expected {SCHEMA_VERSION}, got {version!r}")
    sections = {}
    for key, (_, cls) in SECTIONS.items():
        items = data.get(key, [])
        if not isinstance(items, list):
            raise CaseFileError(f"{key}: expected a list")
        sections[key] = tuple(_build(cls, item, f"{key}[{n}]") for n, item in enumerate(items))
    if "planning" not in data:
        raise CaseFileError("planning: missing")
    planning = _build(PlanningConfig, data["planning"], "planning")
    ccg = _build(CCGSettings, data["ccg"], "ccg") if data.get("ccg") is not None else None
    return NetworkCase(
        name=str(data.get("name", "")),
        buses=sections["buses"],
        lines=sections["lines"],
        generators=sections["generators"],
        demands=sections["demands"],
        planning=planning,
        generator_groups=sections["generator_groups"],
        ccg=ccg,
        notes=str(data.get("notes", "")),
    )


def case_to_dict(case: NetworkCase) -> dict:
    def plain(obj):
        out = {}
        for f in dataclasses.fields(obj):
            v = getattr(obj, f.name)
            out[f.name] = [list(x) if isinstance(x, tuple) else x for x in v] if isinstance(v, tuple) else v
        return out

    data: dict[str, Any] = {"schema_version": SCHEMA_VERSION, "name": case.name, "notes": case.notes}
    for key in SECTIONS:
        data[key] = [plain(item) for item in getattr(case, key)]
    data["planning"] = plain(case.planning)
    data["ccg"] = plain(case.ccg) if case.ccg is not None else None
    return data


_ASSET = re.compile(r"^(bus|line|generator|group|demand) (\S+?):")


def _with_paths(case: NetworkCase, messages: tuple[str, ...]) -> list[str]:
    index = {}
    for key, (kind, _) in SECTIONS.items():
        for n, item in enumerate(getattr(case, key)):
            ident = getattr(item, "group_id", None) or getattr(item, "id", None)
            index[(kind, ident)] = f"{key}[{n}]"
    out = []
    for msg in messages:
        m = _ASSET.match(msg)
        path = index.get((m.group(1), m.group(2))) if m else None
        out.append(f"{path}: {msg}" if path else msg)
    return out


def load_case(path: str | Path) -> NetworkCase:
    """Parse and validate a case file; errors carry the offending location."""
    path = resolve_case_path(path)
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CaseFileError(f"{path}: parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    case = case_from_dict(data)
    report = validate_case(case)
    if not report.ok:
        raise CaseFileError(f"{path}: invalid case:\n  " + "\n  ".join(_with_paths(case, report.violations)))
    return case


def dumps_case(case: NetworkCase) -> str:
    return json.dumps(case_to_dict(case), indent=2, ensure_ascii=False) + "\n"


def save_case(case: NetworkCase, path: str | Path) -> None:
    Path(path).write_text(dumps_case(case), encoding="utf-8")


# -- plan files ------------------------------------------------------------------


def plan_from_dict(case: NetworkCase, data: Any) -> InvestmentPlan:
    """``{"lines": {id: period}, "generators": {id: period}}``."""
    if not isinstance(data, dict) or set(data) - {"lines", "generators"}:
        raise CaseFileError('plan file: expected an object with "lines" and/or "generators"')
    lines, gens = data.get("lines", {}), data.get("generators", {})
    ny = case.planning.horizon_years
    for kind, entries, known in (("line", lines, {k.id for k in case.candidate_lines}),
                                 ("generator", gens, {g.id for g in case.candidate_generators})):
        if not isinstance(entries, dict):
            raise CaseFileError(f"plan file: {kind}s must map asset id to build period")
        for asset, t in entries.items():
            if asset not in known:
                raise CaseFileError(f"plan file: {asset!r} is not a candidate {kind}")
            if not isinstance(t, int) or not 1 <= t <= ny:
                raise CaseFileError(f"plan file: {kind} {asset!r} period {t!r} outside 1..{ny}")
    return InvestmentPlan.from_periods(case, lines, gens)


def load_plan(case: NetworkCase, path: str | Path) -> InvestmentPlan:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CaseFileError(f"{path}: parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return plan_from_dict(case, data)


def plan_to_dict(plan: InvestmentPlan) -> dict:
    lines, gens = plan.build_periods()
    return {"lines": dict(sorted(lines.items())), "generators": dict(sorted(gens.items()))}


# -- reports ---------------------------------------------------------------------


@dataclass(frozen=True)
class ScheduleRow:
    kind: str
    asset: str
    location: str
    period: int
    invest_cost: float  # M€, undiscounted
    discounted: float  # M€


@dataclass(frozen=True)
class PeriodRow:
    period: int
    c_op: float  # €, worst case
    shed_cost: float  # €
    weight: float


@dataclass(frozen=True)
class TraceRow:
    iteration: int
    z_lo: float
    z_up: float
    best_up: float
    gap: float
    seconds: float


@dataclass(frozen=True)
class Report:
    case: str
    converged: bool
    iterations: int
    lower_bound: float
    upper_bound: float
    gap: float
    schedule: tuple[ScheduleRow, ...]
    line_npc: float
    gen_npc: float
    periods: tuple[PeriodRow, ...]
    trace: tuple[TraceRow, ...] = field(default=())

    @property
    def investment_npc(self) -> float:
        return self.line_npc + self.gen_npc

    @property
    def operational_npc(self) -> float:
        return sum(p.weight * p.c_op for p in self.periods) / MEUR

    @property
    def shedding_npc(self) -> float:
        return sum(p.weight * p.shed_cost for p in self.periods) / MEUR

    @property
    def objective(self) -> float:
        return self.investment_npc + self.operational_npc

    def to_dict(self) -> dict:
        return {
            "case": self.case,
            "converged": self.converged,
            "iterations": self.iterations,
            "bounds": {"lower": self.lower_bound, "upper": self.upper_bound, "gap": self.gap},
            "objective": self.objective,
            "investment": {"lines": self.line_npc, "generators": self.gen_npc, "total": self.investment_npc},
            "operational_npc": self.operational_npc,
            "shedding_npc": self.shedding_npc,
            "schedule": [dataclasses.asdict(r) for r in self.schedule],
            "periods": [dataclasses.asdict(r) for r in self.periods],
            "trace": [dataclasses.asdict(r) for r in self.trace],
        }


def schedule_rows(case: NetworkCase, plan: InvestmentPlan) -> tuple[ScheduleRow, ...]:
    rate = case.planning.discount_rate
    lines, gens = plan.build_periods()
    rows = []
    for k in case.candidate_lines:
        if k.id in lines:
            t = lines[k.id]
            rows.append(ScheduleRow("line", k.id, f"{k.from_bus}-{k.to_bus}", t, k.invest_cost,
                                    discount_factor(rate, t) * k.invest_cost))
    for g in case.candidate_generators:
        if g.id in gens:
            t = gens[g.id]
            rows.append(ScheduleRow("generator", g.id, g.bus, t, g.invest_cost,
                                    discount_factor(rate, t) * g.invest_cost))
    return tuple(sorted(rows, key=lambda r: (r.period, r.kind, r.asset)))


def report_from_trace(case: NetworkCase, trace) -> Report:
    rate = case.planning.discount_rate
    plan = trace.best_plan
    periods = tuple(PeriodRow(t, w.c_op, w.shed_cost, operational_weight(rate, t))
                    for t, w in sorted(trace.best_worst.items()))
    rows = tuple(TraceRow(r.iteration, r.z_lo, r.z_up, r.best_up, r.gap, r.seconds) for r in trace.iterations)
    return Report(case.name, trace.converged, trace.n_iterations, trace.lower_bound, trace.upper_bound, trace.gap,
                  schedule_rows(case, plan), trace.line_npc, trace.gen_npc, periods, rows)


SCHEDULE_HEADER = ["kind", "asset", "location", "period", "invest_cost_meur", "discounted_meur"]
TRACE_HEADER = ["iteration", "z_lo", "z_up", "best_up", "gap", "seconds"]


def write_report(report: Report, path: str | Path, fmt: str = "json") -> list[Path]:
    """Write ``report``; csv gives ``<stem>_schedule.csv`` and ``<stem>_trace.csv``."""
    path = Path(path)
    if fmt == "json":
        path.write_text(json.dumps(report.to_dict(), indent=2) + "\n", encoding="utf-8")
        return [path]
    if fmt != "csv":
        raise ValueError(f"unknown report format {fmt!r}")
    stem = path.with_suffix("") if path.suffix else path
    sched = stem.parent / f"{stem.name}_schedule.csv"
    trace = stem.parent / f"{stem.name}_trace.csv"
    with sched.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(SCHEDULE_HEADER)
        for r in report.schedule:
            w.writerow([r.kind, r.asset, r.location, r.period, repr(r.invest_cost), repr(r.discounted)])
        if report.schedule:
            w.writerow(["total", "", "", "", repr(sum(r.invest_cost for r in report.schedule)),
                        repr(sum(r.discounted for r in report.schedule))])
    with trace.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(TRACE_HEADER)
        for r in report.trace:
            w.writerow([r.iteration, repr(r.z_lo), repr(r.z_up), repr(r.best_up), repr(r.gap), repr(r.seconds)])
    return [sched, trace]
