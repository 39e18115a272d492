"""Continuous-time constrained SLQ trajectory optimization with an MPC harness."""

from .costs import CostFunction, quadratic_tracking_cost
from .dual import (
    DualRule,
    DualUpdateConfig,
    check_stability,
    initial_multipliers,
    update_multiplier_trajectory,
    update_pi1,
    update_pi2,
    update_pi3,
)
from .mpc import (
    ComparisonReport,
    MpcConfig,
    MpcMetrics,
    MpcResult,
    compare_methods,
    run_mpc,
    violation_l2,
)
from .penalties import (
    PenaltyEvaluation,
    PenaltyKind,
    PenaltyStrategy,
    equality_al_penalty,
    evaluate_penalty,
    nonslack_penalty,
    phr_penalty,
    psi_function,
    quadratize_constraint_term,
    relaxed_barrier_penalty,
    smooth_phr_penalty,
)
from .projection import (
    InputReconstruction,
    LinearizedEquality,
    RankDeficiencyError,
    project_lq_subproblem,
    projection_terms,
)
from .solver import (
    AffinePolicy,
    IterationStats,
    LqApproximation,
    OcpDefinition,
    RiccatiError,
    RiccatiSolution,
    SlqSettings,
    Solution,
    backward_riccati,
    forward_rollout,
    line_search,
    quadratize,
    regularize,
    slq_iterate,
    solve,
)
from .systems import (
    CartPoleParams,
    ConstraintSet,
    PlanarMoverParams,
    SystemModel,
    box_input_constraints,
    cartpole_model,
    finite_difference_check,
    obstacle_constraints,
    planar_mover_model,
)
from .tasks import build_task
from .trajectory import (
    IntegrationError,
    IntegratorSettings,
    NonFiniteStateError,
    StepLimitError,
    TimeGrid,
    Trajectory,
    integrate_ode,
    interpolate,
    shift_and_extrapolate,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
