"""Linear / mixed-binary programming core."""

from .backends import default_backend, highs_solve, solve
from .bnb import solve_mip
from .program import EQ, GE, INF, LE, MathProgram, ProgramError, SolveOutcome, Status
from .simplex import solve_lp

__all__ = [
    "EQ",
    "GE",
    "INF",
    "LE",
    "MathProgram",
    "ProgramError",
    "SolveOutcome",
    "Status",
    "default_backend",
    "highs_solve",
    "solve",
    "solve_lp",
    "solve_mip",
]
