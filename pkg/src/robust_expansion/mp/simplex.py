"""Dense bounded-variable revised simplex.

Every row ``lo <= a x <= hi`` gets a logical variable ``r = a x`` so the
working system is ``[A, -I] (x, r) = 0`` with bounds on all columns. The
all-logical basis is always a valid starting point, and any basis left by a
previous solve can be reused after bound changes (branch-and-bound), in which
case phase 1 repairs whatever primal infeasibility the new bounds introduce.

Phase 1 minimises the sum of bound violations of the basic variables; phase 2
minimises the row/objective-scaled cost. Dantzig pricing is used until 50
consecutive degenerate pivots occur, after which Bland's rule takes over until
the next non-degenerate step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .program import MathProgram, ProgramArrays, SolveOutcome, Status

FEAS_TOL = 1e-9
OPT_TOL = 1e-9
PIVOT_TOL = 1e-9
BLAND_AFTER = 50
REFACTOR_EVERY = 50


@dataclass
class Basis:
    basic: np.ndarray  # column indices, one per row
    at_upper: np.ndarray  # nonbasic placement flags over all columns


@dataclass
class RawResult:
    status: Status
    x: np.ndarray | None  # structural values, original units
    objective: float  # min-form objective without constant, original units
    row_duals: np.ndarray | None  # min-form d(obj)/d(rhs)
    reduced_costs: np.ndarray | None
    iterations: int
    basis: Basis | None
    infeasible: list[int]  # column indices violating bounds when phase 1 stalls


class LPKernel:
    """Scaled, min-form copy of a program that can be re-solved under new bounds."""

    def __init__(self, arrays: ProgramArrays):
        A = arrays.A
        m, n = A.shape
        self.m, self.n = m, n
        self.maximize = arrays.sense == "max"
        c = -arrays.c if self.maximize else arrays.c.copy()
        self.c_orig = c
        scale = np.abs(A).max(axis=1) if n else np.zeros(m)
        scale[scale == 0.0] = 1.0
        self.row_scale = scale
        cmax = float(np.abs(c).max()) if n else 0.0
        self.cost_scale = cmax if cmax > 0 else 1.0
        self.M = np.hstack([A / scale[:, None], -np.eye(m)])
        self.cost = np.concatenate([c / self.cost_scale, np.zeros(m)])
        self.row_lo = arrays.row_lo / scale
        self.row_hi = arrays.row_hi / scale
        self.lb = arrays.lb
        self.ub = arrays.ub

    def solve(self, lb=None, ub=None, basis: Basis | None = None, max_iter: int | None = None) -> RawResult:
        lb = self.lb if lb is None else lb
        ub = self.ub if ub is None else ub
        L = np.concatenate([lb, self.row_lo])
        U = np.concatenate([ub, self.row_hi])
        if np.any(L > U + FEAS_TOL):
            bad = [int(j) for j in np.nonzero(L > U + FEAS_TOL)[0]]
            return RawResult(Status.INFEASIBLE, None, math.nan, None, None, 0, None, bad)
        limit = max_iter or 50 * (self.m + self.n) + 5000
        return _run(self, L, U, basis, limit)


def _nonbasic_value(L: float, U: float, upper: bool) -> float:
    if upper and U < math.inf:
        return U
    if L > -math.inf:
        return L
    if U < math.inf:
        return U
    return 0.0


def _run(k: LPKernel, L: np.ndarray, U: np.ndarray, start: Basis | None, limit: int) -> RawResult:
    m, n = k.m, k.n
    N = n + m
    M, cost = k.M, k.cost

    if start is None:
        basic = np.arange(n, N)
        at_upper = np.zeros(N, dtype=bool)
        # cheap phase-2 friendly placement for boxed columns
        at_upper[:n] = (k.cost[:n] < 0) & np.isfinite(U[:n])
    else:
        basic = start.basic.copy()
        at_upper = start.at_upper.copy()

    is_basic = np.zeros(N, dtype=bool)
    is_basic[basic] = True
    x = np.zeros(N)
    for j in np.nonzero(~is_basic)[0]:
        x[j] = _nonbasic_value(L[j], U[j], bool(at_upper[j]))

    Binv = _invert(M[:, basic]) if m else np.zeros((0, 0))
    if Binv is None:
        basic = np.arange(n, N)
        is_basic[:] = False
        is_basic[basic] = True
        for j in range(n):
            x[j] = _nonbasic_value(L[j], U[j], bool(at_upper[j]))
        Binv = -np.eye(m)
    nonbasic_cols = ~is_basic
    x[basic] = -Binv @ (M[:, nonbasic_cols] @ x[nonbasic_cols]) if m else x[basic]

    iterations = 0
    since_refactor = 0
    degenerate_run = 0
    verified = False

    while True:
        xB = x[basic]
        lo, hi = L[basic], U[basic]
        below = xB < lo - FEAS_TOL
        above = xB > hi + FEAS_TOL
        phase1 = bool(below.any() or above.any())
        if phase1:
            cB = np.where(below, -1.0, np.where(above, 1.0, 0.0))
            y = cB @ Binv if m else np.zeros(0)
            d = -(y @ M) if m else np.zeros(N)
        else:
            cB = cost[basic]
            y = cB @ Binv if m else np.zeros(0)
            d = cost - (y @ M if m else 0.0)
        d[basic] = 0.0

        can_inc = x < U - FEAS_TOL
        can_dec = x > L + FEAS_TOL
        inc = (d < -OPT_TOL) & can_inc & ~is_basic
        dec = (d > OPT_TOL) & can_dec & ~is_basic
        eligible = inc | dec

        if not eligible.any():
            if since_refactor and not verified:
                # confirm with a fresh factorization before declaring a result
                Binv, x = _refactor(M, basic, is_basic, x)
                since_refactor = 0
                verified = True
                continue
            if phase1:
                bad = [int(basic[i]) for i in np.nonzero(below | above)[0]]
                return RawResult(Status.INFEASIBLE, None, math.nan, None, None, iterations, None, bad)
            return _finish(k, x, y, d, basic, is_basic, L, U, iterations)

        if iterations >= limit:
            return RawResult(Status.ITERATION_LIMIT, None, math.nan, None, None, iterations, None, [])
        verified = False

        if degenerate_run >= BLAND_AFTER:
            j = int(np.nonzero(eligible)[0][0])
        else:
            score = np.where(eligible, np.abs(d), -1.0)
            j = int(np.argmax(score))
        direction = 1.0 if inc[j] else -1.0

        alpha = Binv @ M[:, j] if m else np.zeros(0)
        delta = -direction * alpha

        ratios = np.full(m, math.inf)
        if m:
            dec_mask = delta < -PIVOT_TOL
            inc_mask = delta > PIVOT_TOL
            if phase1:
                feas = ~(below | above)
                down = dec_mask & feas & np.isfinite(lo)
                up = inc_mask & feas & np.isfinite(hi)
                ratios[down] = (xB[down] - lo[down]) / -delta[down]
                ratios[up] = (hi[up] - xB[up]) / delta[up]
                rise = inc_mask & below
                ratios[rise] = (lo[rise] - xB[rise]) / delta[rise]
                fall = dec_mask & above
                ratios[fall] = (xB[fall] - hi[fall]) / -delta[fall]
            else:
                down = dec_mask & np.isfinite(lo)
                up = inc_mask & np.isfinite(hi)
                ratios[down] = (xB[down] - lo[down]) / -delta[down]
                ratios[up] = (hi[up] - xB[up]) / delta[up]
            np.maximum(ratios, 0.0, out=ratios)

        flip = U[j] - L[j] if (math.isfinite(U[j]) and math.isfinite(L[j])) else math.inf
        tmin = float(ratios.min()) if m else math.inf

        if flip == math.inf and tmin == math.inf:
            status = Status.ITERATION_LIMIT if phase1 else Status.UNBOUNDED
            return RawResult(status, None, math.nan, None, None, iterations, None, [])
        if flip <= tmin:
            theta = flip
            leave = -1
        else:
            theta = tmin
            near = np.nonzero(ratios <= tmin + 1e-12 * (1.0 + tmin))[0]
            if degenerate_run >= BLAND_AFTER:
                leave = int(near[np.argmin(basic[near])])
            else:
                leave = int(near[np.argmax(np.abs(delta[near]))])

        x[j] += direction * theta
        if m:
            x[basic] += delta * theta
        iterations += 1
        degenerate_run = degenerate_run + 1 if theta <= 1e-12 else 0

        if leave < 0:
            at_upper[j] = direction > 0
            x[j] = U[j] if direction > 0 else L[j]
            continue

        q = int(basic[leave])
        # leaving column sits exactly on the bound it reached
        if delta[leave] > 0:
            hit_upper = not (phase1 and below[leave])
        else:
            hit_upper = bool(phase1 and above[leave])
        x[q] = U[q] if hit_upper else L[q]
        at_upper[q] = hit_upper
        basic[leave] = j
        is_basic[q] = False
        is_basic[j] = True

        piv = alpha[leave]
        row = Binv[leave] / piv
        Binv -= np.outer(alpha, row)
        Binv[leave] = row
        since_refactor += 1
        if since_refactor >= REFACTOR_EVERY:
            Binv, x = _refactor(M, basic, is_basic, x)
            since_refactor = 0


def _invert(B: np.ndarray) -> np.ndarray | None:
    try:
        inv = np.linalg.inv(B)
    except np.linalg.LinAlgError:
        return None
    if not np.all(np.isfinite(inv)):
        return None
    return inv


def _refactor(M, basic, is_basic, x):
    Binv = _invert(M[:, basic])
    if Binv is None:
        raise np.linalg.LinAlgError("basis became singular")
    nb = ~is_basic
    x[basic] = -Binv @ (M[:, nb] @ x[nb])
    return Binv, x


def _finish(k: LPKernel, x, y, d, basic, is_basic, L, U, iterations) -> RawResult:
    n = k.n
    xs = x[:n].copy()
    # snap nonbasic structurals exactly onto their bounds
    objective = float(k.c_orig @ xs)
    row_duals = y * k.cost_scale / k.row_scale
    reduced = d[:n] * k.cost_scale
    at_upper = np.zeros(n + k.m, dtype=bool)
    nb = np.nonzero(~is_basic)[0]
    at_upper[nb] = np.isfinite(U[nb]) & (np.abs(x[nb] - U[nb]) <= np.abs(x[nb] - L[nb]))
    return RawResult(
        Status.OPTIMAL, xs, objective, row_duals, reduced, iterations, Basis(basic.copy(), at_upper), []
    )


def solve_lp(program: MathProgram, basis: Basis | None = None) -> SolveOutcome:
    """Solve the LP relaxation of ``program`` (binary flags are ignored)."""
    kernel = LPKernel(program.to_arrays())
    raw = kernel.solve(basis=basis)
    return to_outcome(program, kernel, raw)


def to_outcome(program: MathProgram, kernel: LPKernel, raw: RawResult, nodes: int = 0) -> SolveOutcome:
    if raw.status is not Status.OPTIMAL:
        rows = []
        for j in raw.infeasible:
            if j >= kernel.n:
                rows.append(program.constraints[j - kernel.n].name)
            else:
                rows.append(program.variables[j].name)
        return SolveOutcome(raw.status, iterations=raw.iterations, nodes=nodes, infeasible_rows=rows, program=program)
    sign = -1.0 if kernel.maximize else 1.0
    duals = None if raw.row_duals is None else sign * raw.row_duals
    reduced = None if raw.reduced_costs is None else sign * raw.reduced_costs
    return SolveOutcome(
        Status.OPTIMAL,
        x=raw.x,
        objective=sign * raw.objective + program.objective_constant,
        duals=duals,
        reduced_costs=reduced,
        iterations=raw.iterations,
        nodes=nodes,
        basis=raw.basis,
        program=program,
    )
