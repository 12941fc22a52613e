"""Best-bound branch-and-bound for programs with binary variables.

Search starts with a depth-first dive (rounding direction first) until the
first incumbent is found, then switches to best-bound node selection. The
branching variable is the most fractional binary, ties going to the lowest
index. Child LPs are warm-started from the parent basis.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from .program import MathProgram, SolveOutcome, Status
from .simplex import Basis, LPKernel, solve_lp, to_outcome

INT_TOL = 1e-6
GAP_ABS = 1e-9
GAP_REL = 1e-9
NODE_LIMIT = 200_000


@dataclass
class _Node:
    bound: float
    lb: np.ndarray
    ub: np.ndarray
    basis: Basis | None
    depth: int


def solve_mip(program: MathProgram, node_limit: int = NODE_LIMIT) -> SolveOutcome:
    bins = np.array(program.binaries, dtype=int)
    if bins.size == 0:
        return solve_lp(program)

    kernel = LPKernel(program.to_arrays())

    incumbent_obj = math.inf
    incumbent = None  # RawResult of the clean re-solve
    nodes = 0
    hit_limit = False
    seq = 0

    def tolerance() -> float:
        return max(GAP_ABS, GAP_REL * abs(incumbent_obj)) if incumbent_obj < math.inf else 0.0

    def expand(node: _Node):
        """Solve a node; return children (down, up) or an empty tuple."""
        nonlocal incumbent_obj, incumbent, hit_limit
        raw = kernel.solve(node.lb, node.ub, node.basis)
        if raw.status is Status.ITERATION_LIMIT:
            hit_limit = True
            return ()
        if raw.status is Status.UNBOUNDED:
            raise _Unbounded
        if raw.status is not Status.OPTIMAL:
            return ()
        if raw.objective >= incumbent_obj - tolerance():
            return ()
        vals = raw.x[bins]
        frac = np.abs(vals - np.round(vals))
        if frac.max() <= INT_TOL:
            lb, ub = node.lb.copy(), node.ub.copy()
            fixed = np.round(vals)
            lb[bins] = fixed
            ub[bins] = fixed
            clean = kernel.solve(lb, ub, raw.basis)
            if clean.status is Status.OPTIMAL and clean.objective < incumbent_obj:
                incumbent_obj = clean.objective
                incumbent = clean
            return ()
        # most fractional; argmax returns the lowest index on ties
        pos = int(np.argmax(frac))
        j = int(bins[pos])
        down_ub = node.ub.copy()
        down_ub[j] = 0.0
        up_lb = node.lb.copy()
        up_lb[j] = 1.0
        down = _Node(raw.objective, node.lb, down_ub, raw.basis, node.depth + 1)
        up = _Node(raw.objective, up_lb, node.ub, raw.basis, node.depth + 1)
        prefer_up = vals[pos] >= 0.5
        return (down, up) if prefer_up else (up, down)

    root = _Node(-math.inf, kernel.lb.copy(), kernel.ub.copy(), None, 0)
    try:
        stack = [root]
        heap: list[tuple[float, int, _Node]] = []
        while stack and incumbent is None:
            if nodes >= node_limit:
                hit_limit = True
                break
            node = stack.pop()
            nodes += 1
            # children come back as (second, first): push so the preferred pops next
            stack.extend(expand(node))
        for node in stack:
            heapq.heappush(heap, (node.bound, seq, node))
            seq += 1
        while heap and not hit_limit:
            bound, _, node = heapq.heappop(heap)
            if bound >= incumbent_obj - tolerance():
                break
            if nodes >= node_limit:
                hit_limit = True
                break
            nodes += 1
            for child in expand(node):
                heapq.heappush(heap, (child.bound, seq, child))
                seq += 1
    except _Unbounded:
        return SolveOutcome(Status.UNBOUNDED, nodes=nodes, program=program)

    if incumbent is None:
        status = Status.ITERATION_LIMIT if hit_limit else Status.INFEASIBLE
        return SolveOutcome(status, nodes=nodes, program=program)
    out = to_outcome(program, kernel, incumbent, nodes=nodes)
    out.x[bins] = np.round(out.x[bins])
    if hit_limit:
        out.status = Status.ITERATION_LIMIT
    # MIP duals are those of the final fixed-binary LP; not meaningful for callers
    out.duals = None
    out.reduced_costs = None
    return out


class _Unbounded(Exception):
    pass
