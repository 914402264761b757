"""Upward rank mobility curves from parent-child income samples.

Estimators (Bernstein/beta copula derivatives, distribution
regression), bootstrap confidence bands with a dominance diagnosis,
parametric copula simulation models, and a Monte Carlo harness.
Served over HTTP by :func:`rankmobility.service.create_app`; the
``rankmobility`` CLI is a thin client of that service.
"""

__version__ = "0.1.0"

from .bernstein import (
    bernstein_curve,
    beta_curve,
    default_order,
    interval_mobility,
)
from .copulas import (
    ClaytonCopula,
    GaussianCopula,
    GumbelCopula,
    IndependenceCopula,
    make_copula,
)
from .curves import CurveEstimate, band_grid, default_grid, make_grid
from .distreg import DRSpec, WarmStartCache, dr_curve, dr_curve_conditional, fit_threshold
from .errors import (
    DomainError,
    EstimationError,
    InputError,
    MobilityError,
    UnfittedThresholdError,
)
from .inference import (
    BandResult,
    DominanceReport,
    bootstrap_band,
    difference_band,
    dominance_report,
)
from .ranks import Sample, compute_ranks, empirical_cdf, empirical_quantile
from .simulation import ExperimentConfig, curve_overlay, run_experiment

__all__ = [
    "__version__",
    "Sample",
    "compute_ranks",
    "empirical_cdf",
    "empirical_quantile",
    "CurveEstimate",
    "make_grid",
    "default_grid",
    "band_grid",
    "bernstein_curve",
    "beta_curve",
    "default_order",
    "interval_mobility",
    "make_copula",
    "GaussianCopula",
    "ClaytonCopula",
    "GumbelCopula",
    "IndependenceCopula",
    "DRSpec",
    "WarmStartCache",
    "dr_curve",
    "dr_curve_conditional",
    "fit_threshold",
    "BandResult",
    "DominanceReport",
    "bootstrap_band",
    "difference_band",
    "dominance_report",
    "ExperimentConfig",
    "run_experiment",
    "curve_overlay",
    "MobilityError",
    "InputError",
    "DomainError",
    "EstimationError",
    "UnfittedThresholdError",
]
