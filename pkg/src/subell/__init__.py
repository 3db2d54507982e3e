"""subell: subgradient and ellipsoid cutting-plane methods with certificates."""

from .certificates import (
    MinWidthReport,
    Semicertificate,
    augment,
    certify_from_preliminary,
    certify_standard_ellipsoid,
    gap,
    residual,
    residual_bound_from_gap,
)
from .linalg import dual_norm, rank_one_inverse_update, top_eigenpair
from .oracles import (
    OracleResponse,
    Problem,
    ProblemFormatError,
    composed_oracle,
    load_problem,
    problem_from_dict,
    problem_to_dict,
    save_problem,
)
from .solver import (
    VARIANT_ELLIPSOID,
    VARIANT_ELLIPSOID_CERT,
    VARIANT_SUBGRAD_ELLIPSOID,
    VARIANT_SUBGRADIENT,
    VARIANTS,
    HistoryRecord,
    RunResult,
    Schedule,
    SolverState,
    StrategyConfig,
    avg_radius,
    compute_U,
    delta_from_target,
    gamma_opt,
    q_and_zeta,
    run,
    sliding_gap,
    step,
)
from .support import HalfspaceCut, dual_multipliers, minimizer_u, support_value_xi, tau

__version__ = "0.1.0"

__all__ = [
    "MinWidthReport", "Semicertificate", "augment", "certify_from_preliminary",
    "certify_standard_ellipsoid", "gap", "residual", "residual_bound_from_gap",
    "dual_norm", "rank_one_inverse_update", "top_eigenpair",
    "OracleResponse", "Problem", "ProblemFormatError", "composed_oracle",
    "load_problem", "problem_from_dict", "problem_to_dict", "save_problem",
    "VARIANTS", "VARIANT_SUBGRADIENT", "VARIANT_ELLIPSOID",
    "VARIANT_ELLIPSOID_CERT", "VARIANT_SUBGRAD_ELLIPSOID",
    "HistoryRecord", "RunResult", "Schedule", "SolverState", "StrategyConfig",
    "avg_radius", "compute_U", "delta_from_target", "gamma_opt", "q_and_zeta",
    "run", "sliding_gap", "step",
    "HalfspaceCut", "dual_multipliers", "minimizer_u", "support_value_xi", "tau",
    "__version__",
]
