"""Solver-agnostic linear / mixed-binary program container."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

INF = math.inf

LE, GE, EQ = "<=", ">=", "=="
_SENSES = (LE, GE, EQ)


class Status(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    ITERATION_LIMIT = "iteration_limit"


class ProgramError(ValueError):
    """Raised for malformed programs (unknown variables, bad bounds, ...)."""


@dataclass(frozen=True)
class Variable:
    name: str
    lb: float = 0.0
    ub: float = INF
    binary: bool = False


@dataclass(frozen=True)
class Constraint:
    name: str
    coefs: dict[int, float]
    sense: str
    rhs: float


class MathProgram:
    """A linear program, optionally with binary variables.

    Variables and constraints are appended through :meth:`add_var` and
    :meth:`add_constraint`; both return integer handles used in coefficient
    maps. Solvers never mutate a program.
    """

    def __init__(self, name: str = "program"):
        self.name = name
        self.variables: list[Variable] = []
        self.constraints: list[Constraint] = []
        self.objective: dict[int, float] = {}
        self.sense = "min"
        self.objective_constant = 0.0
        self._var_index: dict[str, int] = {}
        self._con_index: dict[str, int] = {}

    # -- building -----------------------------------------------------------

    def add_var(self, name: str, lb: float = 0.0, ub: float = INF, binary: bool = False) -> int:
        if name in self._var_index:
            raise ProgramError(f"duplicate variable name {name!r}")
        if math.isnan(lb) or math.isnan(ub) or lb > ub:
            raise ProgramError(f"variable {name!r} has invalid bounds [{lb}, {ub}]")
        if binary and (lb < 0.0 or ub > 1.0):
            raise ProgramError(f"binary variable {name!r} must have bounds within [0, 1]")
        self.variables.append(Variable(name, float(lb), float(ub), binary))
        self._var_index[name] = len(self.variables) - 1
        return len(self.variables) - 1

    def add_constraint(self, coefs: dict[int, float], sense: str, rhs: float, name: str | None = None) -> int:
        if sense not in _SENSES:
            raise ProgramError(f"unknown constraint sense {sense!r}")
        name = name or f"c{len(self.constraints)}"
        if name in self._con_index:
            raise ProgramError(f"duplicate constraint name {name!r}")
        clean: dict[int, float] = {}
        for j, a in coefs.items():
            if not 0 <= j < len(self.variables):
                raise ProgramError(f"constraint {name!r} references undeclared variable {j}")
            if not math.isfinite(a):
                raise ProgramError(f"constraint {name!r} has non-finite coefficient")
            if a != 0.0:
                clean[j] = clean.get(j, 0.0) + float(a)
        if not math.isfinite(rhs):
            raise ProgramError(f"constraint {name!r} has non-finite right-hand side")
        self.constraints.append(Constraint(name, clean, sense, float(rhs)))
        self._con_index[name] = len(self.constraints) - 1
        return len(self.constraints) - 1

    def set_objective(self, coefs: dict[int, float], sense: str = "min", constant: float = 0.0) -> None:
        if sense not in ("min", "max"):
            raise ProgramError(f"objective sense must be 'min' or 'max', got {sense!r}")
        for j, a in coefs.items():
            if not 0 <= j < len(self.variables):
                raise ProgramError(f"objective references undeclared variable {j}")
            if not math.isfinite(a):
                raise ProgramError("objective coefficients must be finite")
        self.objective = {j: float(a) for j, a in coefs.items() if a != 0.0}
        self.sense = sense
        self.objective_constant = float(constant)

    # -- queries ------------------------------------------------------------

    @property
    def n_vars(self) -> int:
        return len(self.variables)

    @property
    def n_cons(self) -> int:
        return len(self.constraints)

    @property
    def binaries(self) -> list[int]:
        return [j for j, v in enumerate(self.variables) if v.binary]

    @property
    def is_mip(self) -> bool:
        return any(v.binary for v in self.variables)

    def var(self, name: str) -> int:
        return self._var_index[name]

    def con(self, name: str) -> int:
        return self._con_index[name]

    def has_var(self, name: str) -> bool:
        return name in self._var_index

    def to_arrays(self) -> "ProgramArrays":
        n, m = self.n_vars, self.n_cons
        A = np.zeros((m, n))
        row_lo = np.full(m, -INF)
        row_hi = np.full(m, INF)
        for i, con in enumerate(self.constraints):
            for j, a in con.coefs.items():
                A[i, j] = a
            if con.sense in (GE, EQ):
                row_lo[i] = con.rhs
            if con.sense in (LE, EQ):
                row_hi[i] = con.rhs
        c = np.zeros(n)
        for j, a in self.objective.items():
            c[j] = a
        lb = np.array([v.lb for v in self.variables], dtype=float)
        ub = np.array([v.ub for v in self.variables], dtype=float)
        return ProgramArrays(A, row_lo, row_hi, c, lb, ub, self.sense, self.objective_constant)

    def to_text(self) -> str:
        """Human-readable LP-format-like dump for debugging."""

        def term_list(coefs: dict[int, float]) -> str:
            if not coefs:
                return "0"
            parts = []
            for k, (j, a) in enumerate(sorted(coefs.items())):
                sign = "-" if a < 0 else ("+" if k else "")
                parts.append(f"{sign} {abs(a):.12g} {self.variables[j].name}".strip())
            return " ".join(parts)

        lines = [f"\\ {self.name}", "Minimize" if self.sense == "min" else "Maximize"]
        obj = term_list(self.objective)
        if self.objective_constant:
            obj += f" + {self.objective_constant:.12g}"
        lines.append(f" obj: {obj}")
        lines.append("Subject To")
        for con in self.constraints:
            lines.append(f" {con.name}: {term_list(con.coefs)} {con.sense} {con.rhs:.12g}")
        lines.append("Bounds")
        for v in self.variables:
            if v.binary:
                continue
            lo = "-inf" if v.lb == -INF else f"{v.lb:.12g}"
            hi = "+inf" if v.ub == INF else f"{v.ub:.12g}"
            lines.append(f" {lo} <= {v.name} <= {hi}")
        bins = [v.name for v in self.variables if v.binary]
        if bins:
            lines.append("Binary")
            lines.extend(f" {b}" for b in bins)
        lines.append("End")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class ProgramArrays:
    """Dense view: ``row_lo <= A x <= row_hi``, ``lb <= x <= ub``."""

    A: np.ndarray
    row_lo: np.ndarray
    row_hi: np.ndarray
    c: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    sense: str
    constant: float


@dataclass
class SolveOutcome:
    status: Status
    x: np.ndarray | None = None
    objective: float = math.nan
    duals: np.ndarray | None = None
    reduced_costs: np.ndarray | None = None
    iterations: int = 0
    nodes: int = 0
    infeasible_rows: list[str] = field(default_factory=list)
    basis: object = None
    program: MathProgram | None = field(default=None, repr=False)

    @property
    def optimal(self) -> bool:
        return self.status is Status.OPTIMAL

    def value(self, name: str) -> float:
        return float(self.x[self.program.var(name)])

    def dual(self, name: str) -> float:
        return float(self.duals[self.program.con(name)])
