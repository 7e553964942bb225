"""Monte Carlo averaging networks for constant-coefficient Kolmogorov equations."""

from .ann import Counts, Network, ShapeError, counters, gradient, realize
from .builder import (BuiltApproximation, GrowthConstants, TheoreticalConstants, build,
                      build_empirical, inner_accuracy, theoretical_constants,
                      theoretical_sample_count)
from .calculus import average_ensemble, ensemble_counts, precompose_affine
from .flow import FlowSpec, sample_affine_flows
from .oracle import Linear, Ridge, RidgeSoftplus, SquaredNorm, exact_solution
from .supnorm import SupEstimate, sup_error

__version__ = "0.1.0"

__all__ = [
    "BuiltApproximation", "Counts", "FlowSpec", "GrowthConstants", "Linear", "Network",
    "Ridge", "RidgeSoftplus", "ShapeError", "SquaredNorm", "SupEstimate",
    "TheoreticalConstants", "average_ensemble", "build", "build_empirical", "counters",
    "ensemble_counts", "exact_solution", "gradient", "inner_accuracy", "precompose_affine",
    "realize", "sample_affine_flows", "sup_error", "theoretical_constants",
    "theoretical_sample_count",
]
