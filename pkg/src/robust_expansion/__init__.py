"""Adaptive robust multi-period transmission and generation expansion planning."""

from .ccg import BoundsCrossed, CCGConfig, CCGTrace, ccg_solve, relative_gap
from .io import load_case, load_plan, save_case, write_report
from .master import ScenarioPool, build_master, deterministic_equivalent, solve_master
from .model import (
    CaseError,
    InvestmentPlan,
    NetworkCase,
    PlanningConfig,
    UncertaintyRealization,
    expand_statuses,
    gamma_g_budget,
    validate_case,
)
from .opf import OPFInfeasible, evaluate_plan, solve_opf
from .oracle import EnumerationBudget, oracle_global_solve, oracle_worst_cost
from .subproblem import BigMError, solve_subproblem

__all__ = [
    "BigMError",
    "BoundsCrossed",
    "CCGConfig",
    "CCGTrace",
    "CaseError",
    "EnumerationBudget",
    "InvestmentPlan",
    "NetworkCase",
    "OPFInfeasible",
    "PlanningConfig",
    "ScenarioPool",
    "UncertaintyRealization",
    "build_master",
    "ccg_solve",
    "deterministic_equivalent",
    "evaluate_plan",
    "expand_statuses",
    "gamma_g_budget",
    "load_case",
    "load_plan",
    "oracle_global_solve",
    "oracle_worst_cost",
    "relative_gap",
    "save_case",
    "solve_master",
    "solve_opf",
    "solve_subproblem",
    "validate_case",
    "write_report",
]
