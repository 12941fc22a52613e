"""Backend selection.

The built-in engine is the default. ``ROBUST_EXPANSION_BACKEND=highs`` routes
solves through SciPy's HiGHS bindings instead, which is useful for larger
cases; results obey the same :class:`SolveOutcome` contract (duals are
``d objective / d rhs`` in the program's own sense).
"""

from __future__ import annotations

import os

import numpy as np

from . import bnb, simplex
from .program import MathProgram, SolveOutcome, Status

ENV_VAR = "ROBUST_EXPANSION_BACKEND"
BACKENDS = ("builtin", "highs")


def default_backend() -> str:
    name = os.environ.get(ENV_VAR, "builtin").strip().lower() or "builtin"
    if name not in BACKENDS:
        raise ValueError(f"{ENV_VAR}={name!r}; expected one of {BACKENDS}")
    return name


def solve(program: MathProgram, backend: str | None = None) -> SolveOutcome:
    """Solve as LP or MIP depending on whether binaries are present."""
    backend = backend or default_backend()
    if backend == "builtin":
        return bnb.solve_mip(program) if program.is_mip else simplex.solve_lp(program)
    if backend == "highs":
        return highs_solve(program)
    raise ValueError(f"unknown backend {backend!r}")


def highs_solve(program: MathProgram) -> SolveOutcome:
    from scipy.optimize import Bounds, LinearConstraint, linprog, milp

    arr = program.to_arrays()
    sign = -1.0 if arr.sense == "max" else 1.0
    c = sign * arr.c
    bounds = list(zip(arr.lb, arr.ub))
    m = arr.A.shape[0]

    if program.is_mip:
        integrality = np.array([1 if v.binary else 0 for v in program.variables])
        cons = [LinearConstraint(arr.A, arr.row_lo, arr.row_hi)] if m else []
        res = milp(
            c,
            constraints=cons,
            integrality=integrality,
            bounds=Bounds(arr.lb, arr.ub),
            options={"mip_rel_gap": 1e-9},
        )
        if res.status == 0:
            x = np.asarray(res.x, dtype=float)
            bins = program.binaries
            x[bins] = np.round(x[bins])
            return SolveOutcome(
                Status.OPTIMAL, x=x, objective=float(arr.c @ x) + arr.constant, program=program
            )
        return SolveOutcome(_map_status(res.status), program=program)

    eq = np.isfinite(arr.row_lo) & (arr.row_lo == arr.row_hi)
    up = np.isfinite(arr.row_hi) & ~eq
    lo = np.isfinite(arr.row_lo) & ~eq
    A_ub = np.vstack([arr.A[up], -arr.A[lo]])
    b_ub = np.concatenate([arr.row_hi[up], -arr.row_lo[lo]])
    res = linprog(
        c,
        A_ub=A_ub if A_ub.size else None,
        b_ub=b_ub if A_ub.size else None,
        A_eq=arr.A[eq] if eq.any() else None,
        b_eq=arr.row_hi[eq] if eq.any() else None,
        bounds=bounds,
        method="highs",
    )
    if res.status != 0:
        return SolveOutcome(_map_status(res.status), program=program)
    duals = np.zeros(m)
    if up.any() or lo.any():
        marg = res.ineqlin.marginals
        n_up = int(up.sum())
        duals[up] += marg[:n_up]
        duals[lo] -= marg[n_up:]
    if eq.any():
        duals[eq] = res.eqlin.marginals
    x = np.asarray(res.x, dtype=float)
    reduced = sign * (c - duals @ arr.A) if m else arr.c.copy()
    return SolveOutcome(
        Status.OPTIMAL,
        x=x,
        objective=float(arr.c @ x) + arr.constant,
        duals=sign * duals,
        reduced_costs=reduced,
        program=program,
    )


def _map_status(code: int) -> Status:
    return {1: Status.ITERATION_LIMIT, 2: Status.INFEASIBLE, 3: Status.UNBOUNDED}.get(code, Status.ITERATION_LIMIT)
