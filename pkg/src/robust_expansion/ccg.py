"""Column-and-constraint generation driver.

Each iteration solves the master for a plan and a lower bound, then the
worst case of every period for that plan, which gives an upper bound and the
scenarios added to the master for the next round.
"""

from __future__ import annotations

import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from .master import ScenarioPool, build_master, solve_master
from .model import MEUR, InvestmentPlan, NetworkCase, operational_weight
from .subproblem import WorstCase, build_dual_subproblem, solve_subproblem

CROSS_TOL = 1e-7


class BoundsCrossed(RuntimeError):
    pass


@dataclass(frozen=True)
class CCGConfig:
    epsilon: float = 1e-6
    max_iterations: int = 50

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be > 0")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    plan: InvestmentPlan
    z_lo: float  # M€
    z_up: float  # M€, this iteration's plan
    best_up: float  # M€, min over iterations so far
    gap: float
    c_op: dict[int, float]  # €, worst case per period
    seconds: float
    new_scenarios: int


@dataclass
class CCGTrace:
    iterations: list[IterationRecord] = field(default_factory=list)
    best_plan: InvestmentPlan | None = None
    best_worst: dict[int, WorstCase] = field(default_factory=dict)
    upper_bound: float = float("inf")
    lower_bound: float = float("-inf")
    converged: bool = False
    pool: ScenarioPool = field(default_factory=ScenarioPool)
    line_npc: float = 0.0
    gen_npc: float = 0.0

    @property
    def gap(self) -> float:
        return relative_gap(self.upper_bound, self.lower_bound)

    @property
    def n_iterations(self) -> int:
        return len(self.iterations)

    @property
    def objective(self) -> float:
        return self.upper_bound


def relative_gap(z_up: float, z_lo: float) -> float:
    """``(z_up - z_lo) / max(|z_up|, 1)``; crossed bounds beyond tolerance are an error."""
    scale = max(abs(z_up), 1.0)
    if z_up < z_lo - CROSS_TOL * scale:
        raise BoundsCrossed(f"upper bound {z_up!r} below lower bound {z_lo!r}")
    return max(0.0, (z_up - z_lo) / scale)


def ccg_solve(
    case: NetworkCase,
    config: CCGConfig | None = None,
    backend: str | None = None,
    verbose: bool = False,
    dump_dir: str | Path | None = None,
    log: Callable[[str], None] | None = None,
) -> CCGTrace:
    if config is None:
        cs = case.ccg
        config = CCGConfig(cs.epsilon, cs.max_iterations) if cs else CCGConfig()
    say = log or (lambda s: print(s, file=sys.stdout, flush=True))
    dump = Path(dump_dir) if dump_dir else None
    if dump:
        dump.mkdir(parents=True, exist_ok=True)
    rate = case.planning.discount_rate
    trace = CCGTrace()
    pool = ScenarioPool()

    for it in range(1, config.max_iterations + 1):
        start = time.perf_counter()
        master = build_master(case, None, pool)
        if dump:
            (dump / f"master_{it:03d}.lp").write_text(master.program.to_text())
        sol = solve_master(master, backend)
        trace.lower_bound = max(trace.lower_bound, sol.lower_bound)
        trace.pool = pool.copy()

        worst: dict[int, WorstCase] = {}
        for t in case.periods:
            if dump:
                sub = build_dual_subproblem(case, sol.statuses, t)
                (dump / f"subproblem_{it:03d}_t{t:02d}.lp").write_text(sub.program.to_text())
            worst[t] = solve_subproblem(case, sol.statuses, t, backend=backend)
        z_up = sol.line_npc + sol.gen_npc + sum(
            operational_weight(rate, t) * w.c_op for t, w in worst.items()) / MEUR
        if z_up < trace.upper_bound:
            trace.upper_bound = z_up
            trace.best_plan = sol.plan
            trace.best_worst = worst
            trace.line_npc, trace.gen_npc = sol.line_npc, sol.gen_npc
        gap = trace.gap
        added = 0 if gap <= config.epsilon else sum(pool.add(w.realization) for w in worst.values())
        trace.iterations.append(IterationRecord(
            it, sol.plan, sol.lower_bound, z_up, trace.upper_bound, gap,
            {t: w.c_op for t, w in worst.items()}, time.perf_counter() - start, added,
        ))
        if verbose:
            say(f"iter {it:3d}  z_lo={sol.lower_bound:.6f}  z_up={z_up:.6f}  best={trace.upper_bound:.6f}  "
                f"gap={gap:.3e}  new={added}")
        if gap <= config.epsilon:
            trace.converged = True
            break
        if added == 0:
            # nothing new to add: the next master would repeat this one
            if verbose:
                say("stalled: no new scenario; stopping")
            break
    return trace
