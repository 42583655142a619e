"""LP core, outer approximation and branch-and-bound."""
from mg1socp.solver.bnb import (
    Branching,
    NodeSelection,
    SolveResult,
    SolverConfig,
    SolveStatus,
    root_bound,
    solve,
)
from mg1socp.solver.lp import LpOutcome, LpProblem, LpStatus, solve_lp
from mg1socp.solver.oa import RelaxationResult, solve_relaxation

__all__ = [
    "Branching", "NodeSelection", "SolveResult", "SolverConfig", "SolveStatus", "root_bound", "solve",
    "LpOutcome", "LpProblem", "LpStatus", "solve_lp", "RelaxationResult", "solve_relaxation",
]
