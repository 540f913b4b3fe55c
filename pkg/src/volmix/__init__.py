"""Gaussian Volterra processes observed through a noisy Brownian channel.

The library simulates moving averages of Brownian increments through
Volterra kernels, computes the conditional law of the hidden process
given a mixed (noisy) observation of its driver in closed form, and
quantifies how much conditioning reduces measurement error.
"""

from .kernels import (
    BrownianIdentity,
    ExponentialOU,
    RiemannLiouville,
    TabulatedKernel,
    TimeGrid,
    VolterraKernel,
    cell_average_matrix,
    covariance,
    covariance_matrix,
    cross_integral,
    psd_defect,
    validate_covariance_matrix,
)
from .mse import (
    MseReport,
    filtered_mse_analytic,
    mc_mse,
    naive_mse_analytic,
    variance_reduction_report,
)
from .predict import (
    PredictionLaw,
    conditional_covariance,
    conditional_covariance_closed,
    conditional_covariance_matrix,
    conditional_mean,
    conditional_mean_path,
    prediction_kernel,
    prediction_law,
    present_variance,
    rho_to_mix,
)
from .simulate import (
    MixParams,
    NoiseDraw,
    PathBundle,
    build_path,
    draw_noise,
    make_bundle,
    mix,
    noise_matrix,
)

__all__ = [
    "BrownianIdentity",
    "ExponentialOU",
    "MixParams",
    "MseReport",
    "NoiseDraw",
    "PathBundle",
    "PredictionLaw",
    "RiemannLiouville",
    "TabulatedKernel",
    "TimeGrid",
    "VolterraKernel",
    "build_path",
    "cell_average_matrix",
    "conditional_covariance",
    "conditional_covariance_closed",
    "conditional_covariance_matrix",
    "conditional_mean",
    "conditional_mean_path",
    "covariance",
    "covariance_matrix",
    "cross_integral",
    "draw_noise",
    "filtered_mse_analytic",
    "make_bundle",
    "mc_mse",
    "mix",
    "naive_mse_analytic",
    "noise_matrix",
    "prediction_kernel",
    "prediction_law",
    "present_variance",
    "psd_defect",
    "rho_to_mix",
    "validate_covariance_matrix",
    "variance_reduction_report",
]

__version__ = "0.1.0"
