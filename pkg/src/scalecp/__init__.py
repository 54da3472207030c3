"""CUSUM tests for changes in scale based on robust scale estimators."""

from scalecp.cpt import TestResult, cusum_curve, detect, kolmogorov_cdf, kolmogorov_sf
from scalecp.dgp import DistributionSpec, SeriesSpec, sample_series
from scalecp.estimators import EstimatorKind, estimate, prefix_estimates
from scalecp.exceptions import DegenerateDensityError, DomainError, NumericError
from scalecp.lrv import LrvConfig, lrv_estimate

__version__ = "0.1.0"

__all__ = [
    "DegenerateDensityError",
    "DistributionSpec",
    "DomainError",
    "EstimatorKind",
    "LrvConfig",
    "NumericError",
    "SeriesSpec",
    "TestResult",
    "cusum_curve",
    "detect",
    "estimate",
    "kolmogorov_cdf",
    "kolmogorov_sf",
    "lrv_estimate",
    "prefix_estimates",
    "sample_series",
]
