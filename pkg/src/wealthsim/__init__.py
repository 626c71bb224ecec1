"""Closed-economy wealth-exchange simulation and analysis toolkit.

Simulates n agents trading through a common redistribution pool under
uniform or Gaussian exchange noise, computes equilibrium statistics of the
resulting wealth distribution, and solves the deterministic two-economy
case in closed form for cross-validation.
"""

__version__ = "0.1.0"

from .core import (
    CONSERVATION_RTOL,
    GENERATOR_NAME,
    MAX_SEED,
    SIMPLEX_ATOL,
    AgentParams,
    ConstantBackground,
    GaussianBackground,
    NoiseBackground,
    Trajectory,
    UniformBackground,
    WealthState,
    background_from_dict,
    make_agents,
    make_rng,
    normalize_epsilon,
    pairwise_delta,
    run_trajectory,
    sample_background,
    sample_epsilon_matrix,
    step,
    validate_epsilon,
)
from .errors import ConservationError, DegenerateInputError, ParameterError
from .solver import (
    ClosedFormSolution,
    ConcordanceReport,
    RootPair,
    TwoEconomyParams,
    characteristic_roots,
    closed_form,
    concordance,
    evaluate,
    evaluate_series,
    fixed_point,
    induced_epsilon_mean,
    system_matrix,
)
from .stats import (
    ComparisonResult,
    ConvergenceReport,
    GammaFit,
    Histogram,
    RunningMoments,
    build_histogram,
    compare_backgrounds,
    detect_equilibrium,
    gamma_fit_moments,
    merge_histograms,
    variance_trajectory,
    wealth_variance,
)

__all__ = [
    "__version__",
    "CONSERVATION_RTOL",
    "GENERATOR_NAME",
    "MAX_SEED",
    "SIMPLEX_ATOL",
    "AgentParams",
    "ClosedFormSolution",
    "ComparisonResult",
    "ConcordanceReport",
    "ConservationError",
    "ConstantBackground",
    "ConvergenceReport",
    "DegenerateInputError",
    "GammaFit",
    "GaussianBackground",
    "Histogram",
    "NoiseBackground",
    "ParameterError",
    "RootPair",
    "RunningMoments",
    "Trajectory",
    "TwoEconomyParams",
    "UniformBackground",
    "WealthState",
    "background_from_dict",
    "build_histogram",
    "characteristic_roots",
    "closed_form",
    "compare_backgrounds",
    "concordance",
    "detect_equilibrium",
    "evaluate",
    "evaluate_series",
    "fixed_point",
    "gamma_fit_moments",
    "induced_epsilon_mean",
    "make_agents",
    "make_rng",
    "merge_histograms",
    "normalize_epsilon",
    "pairwise_delta",
    "run_trajectory",
    "sample_background",
    "sample_epsilon_matrix",
    "step",
    "system_matrix",
    "validate_epsilon",
    "variance_trajectory",
    "wealth_variance",
]
