"""Gaussian-smoothed 1-Wasserstein distance: estimation, fitting and inference."""

__version__ = "0.1.0"

from .errors import (
    CellError,
    ConfigError,
    DimensionError,
    FitError,
    ParameterError,
    PreconditionError,
    QuadratureError,
    ResourceError,
    SwdError,
)
from .measures import (
    DiagGaussian,
    DiscreteMeasure,
    Gaussian,
    GaussianMixture,
    ModelFamily,
    ParametricModel,
    ThetaSpace,
    Uniform,
    resample_bootstrap,
    sample_model,
    smoothed_cdf_1d,
)
from .rng import RngStream
from .swd import EstimatorConfig, SwdEstimate, donsker_bound, swd, swd_1d_exact, swd_mc
from .transport import TransportPlan, sinkhorn_w1, solve_w1_1d_sorted, solve_w1_exact
