"""Cone-constrained linear-quadratic stochastic control with a default jump.

The state is scalar; the control lives in R^m or its nonnegative orthant.
A single credit event at an intensity-driven random time switches the
coefficient set, and the value function is piecewise quadratic with
separate weights on the positive and negative parts of the state.

Layered API, lowest to highest:

  model         problem containers, validation, case classification
  hamiltonian   per-point cone-constrained quadratic minimization
  riccati       backward solve, feedback gains, value evaluation
  simulate      closed-loop Euler paths and Monte Carlo estimates
  meanvariance  defaultable-market frontier via the quadratic embedding
  verify        self-contained acceptance battery
  cli           `conelq <mode> <config>` batch front end
"""

from .errors import (
    BlowUp,
    ConelqError,
    ConvexityViolated,
    DegenerateDual,
    InfeasibleTarget,
    InvariantViolation,
    NeitherCase,
    NonCoercive,
    NonFinite,
    NotPSD,
    OutOfRange,
    ParseError,
    SchemaError,
    ViolatedAssumption,
)
from .model import (
    CaseClass,
    CoefficientSlice,
    ConeKind,
    ConeSpec,
    LQProblem,
    PostDefaultCoeffs,
    PreDefaultCoeffs,
    TerminalWeights,
    ThetaDep,
    TimeGrid,
    Validation,
    coefficient_at,
    validate_problem,
)
from .hamiltonian import (
    HamiltonianInput,
    MinResult,
    f_jump,
    grid_oracle_min,
    hamiltonian_objective,
    minimize_h_post,
    minimize_h_pre,
)
from .riccati import (
    FeedbackPolicy,
    RiccatiSolution,
    assemble,
    extract_policy,
    solve_diagonals,
    solve_post_default,
    solve_pre_default,
    value_at,
)
from .simulate import (
    MCEstimate,
    PathRecord,
    TerminalMoments,
    cumulative_intensity,
    mc_cost,
    mc_terminal_moments,
    sample_default,
    simulate_path,
)
from .meanvariance import (
    Feasibility,
    FrontierPoint,
    MarketSpec,
    dual_value,
    embed,
    embedded_solution,
    feasibility_check,
    frontier,
    optimal_eta,
    rate_integral,
    validate_market,
)
from .verify import (
    CheckResult,
    VerificationReport,
    classical_riccati_reference,
    golden_section_max,
    policy_grid_oracle,
    run_suite,
    scale_policy,
)
from ._kernels import backend_name

__version__ = "0.1.0"

__all__ = [
    "BlowUp",
    "CaseClass",
    "CheckResult",
    "CoefficientSlice",
    "ConeKind",
    "ConeSpec",
    "ConelqError",
    "ConvexityViolated",
    "DegenerateDual",
    "Feasibility",
    "FeedbackPolicy",
    "FrontierPoint",
    "HamiltonianInput",
    "InfeasibleTarget",
    "InvariantViolation",
    "LQProblem",
    "MCEstimate",
    "MarketSpec",
    "MinResult",
    "NeitherCase",
    "NonCoercive",
    "NonFinite",
    "NotPSD",
    "OutOfRange",
    "ParseError",
    "PathRecord",
    "PostDefaultCoeffs",
    "PreDefaultCoeffs",
    "RiccatiSolution",
    "SchemaError",
    "TerminalMoments",
    "TerminalWeights",
    "ThetaDep",
    "TimeGrid",
    "Validation",
    "VerificationReport",
    "ViolatedAssumption",
    "assemble",
    "backend_name",
    "classical_riccati_reference",
    "coefficient_at",
    "cumulative_intensity",
    "dual_value",
    "embed",
    "embedded_solution",
    "extract_policy",
    "f_jump",
    "feasibility_check",
    "frontier",
    "golden_section_max",
    "grid_oracle_min",
    "hamiltonian_objective",
    "mc_cost",
    "mc_terminal_moments",
    "minimize_h_post",
    "minimize_h_pre",
    "optimal_eta",
    "policy_grid_oracle",
    "rate_integral",
    "run_suite",
    "sample_default",
    "scale_policy",
    "simulate_path",
    "solve_diagonals",
    "solve_post_default",
    "solve_pre_default",
    "validate_market",
    "validate_problem",
    "value_at",
    "__version__",
]
