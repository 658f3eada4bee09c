from .admm import AdmmSolver, detect_infeasibility, solve_qp
from .backend_manager import KktBackendManager, default_manager
from .qp_types import (
    INFTY,
    AdmmSettings,
    QpProblem,
    QpSolution,
    QpStatus,
    dump_problem,
    load_problem_dump,
    problem_to_dict,
)

__all__ = [
    "AdmmSolver",
    "detect_infeasibility",
    "solve_qp",
    "KktBackendManager",
    "default_manager",
    "INFTY",
    "AdmmSettings",
    "QpProblem",
    "QpSolution",
    "QpStatus",
    "dump_problem",
    "load_problem_dump",
    "problem_to_dict",
]
