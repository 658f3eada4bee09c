from .settings import PlannerMode, PlannerSettings, SqpConfig
from .assembler import (
    AssembledQp,
    DiscreteProblem,
    assemble,
    build_discrete_problem,
    build_objective,
    calibrate_zeta,
    constraint_violations,
    discrete_accel,
    evaluate_nonlinear,
    hessian_condition,
    linearize_constraints,
    normalized_accelerations,
    objective_terms,
)
from .sqp import (
    PlanResult,
    PlanStatus,
    SqpIterationRecord,
    SqpPlanner,
    cold_start_guess,
    evaluate_errors,
    sqp_solve,
    warm_start_guess,
)

__all__ = [
    "PlannerMode",
    "PlannerSettings",
    "SqpConfig",
    "AssembledQp",
    "DiscreteProblem",
    "assemble",
    "build_discrete_problem",
    "build_objective",
    "calibrate_zeta",
    "constraint_violations",
    "discrete_accel",
    "evaluate_nonlinear",
    "hessian_condition",
    "linearize_constraints",
    "normalized_accelerations",
    "objective_terms",
    "PlanResult",
    "PlanStatus",
    "SqpIterationRecord",
    "SqpPlanner",
    "cold_start_guess",
    "evaluate_errors",
    "sqp_solve",
    "warm_start_guess",
]
