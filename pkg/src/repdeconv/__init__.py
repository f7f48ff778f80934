"""Deconvolution density and errors-in-variables regression estimation from
replicated measurements, with the error distribution estimated from the data."""

__version__ = "0.1.0"

from .bandwidth import plugin_bandwidth_density, select_cv_bandwidth
from .density import (
    CurveEstimate,
    clip_and_renormalize,
    estimate_density,
    estimate_density_known,
    naive_density,
    theorem34_diagnostics,
)
from .error_model import (
    ErrorCF,
    error_moments,
    estimate_error_cf,
    estimated_cf,
    known_cf,
    moment_match,
    tail_correct,
)
from .errors import DeconvolutionError
from .regression import RegressionEstimate, estimate_regression, naive_regression
from .samples import RegressionSample, ReplicatedSample

__all__ = [
    "CurveEstimate", "DeconvolutionError", "ErrorCF", "RegressionEstimate", "RegressionSample",
    "ReplicatedSample", "clip_and_renormalize", "error_moments", "estimate_density",
    "estimate_density_known", "estimate_error_cf", "estimate_regression", "estimated_cf", "known_cf",
    "moment_match", "naive_density", "naive_regression", "plugin_bandwidth_density",
    "select_cv_bandwidth", "tail_correct", "theorem34_diagnostics",
    "__version__",
]
