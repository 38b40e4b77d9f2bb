"""Distributionally robust fault detection."""

from .ambiguity import INF, AmbiguitySet, SupportSet, from_samples
from .bounds import (
    BoundResult,
    Branch,
    bounded_chebyshev_bound,
    bounded_gauss_bound,
    chebyshev_bound,
    default_tau0,
    gauss_bound,
    gauss_bound_tau,
    improvement_factor,
)
from .design import (
    DesignResult,
    Scheme,
    bounded_design,
    closed_form_design,
    design_for_scheme,
    frobenius_design,
    glrt_design,
    safe_threshold,
    worst_case_far,
)
from .sysmodel import LtiSystem, ResidualModel, parity_residual_model, simulate_lti, three_tank_benchmark
from .verify import RadialMixture, calibrated_mixture, evaluate_far_fdr, monte_carlo_tail

__version__ = "0.1.0"

__all__ = [
    "INF",
    "AmbiguitySet",
    "BoundResult",
    "Branch",
    "DesignResult",
    "LtiSystem",
    "RadialMixture",
    "ResidualModel",
    "Scheme",
    "SupportSet",
    "bounded_chebyshev_bound",
    "bounded_design",
    "bounded_gauss_bound",
    "calibrated_mixture",
    "chebyshev_bound",
    "closed_form_design",
    "default_tau0",
    "design_for_scheme",
    "evaluate_far_fdr",
    "frobenius_design",
    "from_samples",
    "gauss_bound",
    "gauss_bound_tau",
    "glrt_design",
    "improvement_factor",
    "monte_carlo_tail",
    "parity_residual_model",
    "safe_threshold",
    "simulate_lti",
    "three_tank_benchmark",
    "worst_case_far",
]
