"""Invariant-measure approximation for ergodic diffusions.

Decreasing-step Euler simulation of the empirical occupation measure,
Monte Carlo estimation of its deviation probabilities, and evaluation of
the matching closed-form concentration bounds.
"""

__version__ = "0.1.0"

from .bounds import (
    BoundParams,
    Regime,
    RegimeChoice,
    asymptotic_curves,
    cardan_root,
    confidence_radius,
    min_exponent,
    min_exponent_over_rho,
    optimal_lambda,
    probability_bound,
    rho_gaussian,
    rho_super_gaussian,
)
from .model import (
    DiffusionModel,
    StandardGaussian,
    SymmetrizedBernoulli,
    TestFunctionPack,
    VarianceProxies,
    builtin_cosine_model,
    carre_source,
    confluence_form,
    estimate_confluence_alpha,
    generator_apply,
    theta_lipschitz_bound,
)
from .montecarlo import (
    DeviationCurve,
    DeviationRow,
    RngPolicy,
    deviation_curve,
    sample_deviations,
    sample_variance,
)
from .simulate import (
    DivergenceError,
    GaussianInitial,
    Observable,
    PathResult,
    PointInitial,
    estimate_invariant_average,
    run_path,
    simulate_block,
    step_once,
)
from .steps import (
    Holder,
    Lipschitz,
    StepSchedule,
    StepSums,
    partial_sums,
    validate_theta,
)

__all__ = [
    "__version__",
    "BoundParams",
    "Regime",
    "RegimeChoice",
    "asymptotic_curves",
    "cardan_root",
    "confidence_radius",
    "min_exponent",
    "min_exponent_over_rho",
    "optimal_lambda",
    "probability_bound",
    "rho_gaussian",
    "rho_super_gaussian",
    "DiffusionModel",
    "StandardGaussian",
    "SymmetrizedBernoulli",
    "TestFunctionPack",
    "VarianceProxies",
    "builtin_cosine_model",
    "carre_source",
    "confluence_form",
    "estimate_confluence_alpha",
    "generator_apply",
    "theta_lipschitz_bound",
    "DeviationCurve",
    "DeviationRow",
    "RngPolicy",
    "deviation_curve",
    "sample_deviations",
    "sample_variance",
    "DivergenceError",
    "GaussianInitial",
    "Observable",
    "PathResult",
    "PointInitial",
    "estimate_invariant_average",
    "run_path",
    "simulate_block",
    "step_once",
    "Holder",
    "Lipschitz",
    "StepSchedule",
    "StepSums",
    "partial_sums",
    "validate_theta",
]
