"""Joint Bayesian recovery of missing links and missing cascade activations."""
__version__ = "0.1.0"

from .errors import ConfigError, DataError, DiffStruError, NumericError, ShapeMismatchError
from .model import CascadeSet, LatentState, ObservedNetwork, PriorConfig, SamplerConfig, generate_from_model
from .predictor import PredictionResult, predict
from .priors import build_prior
from .sampler import GibbsSampler, PosteriorEstimate, run_gibbs

__all__ = [
    "CascadeSet", "ConfigError", "DataError", "DiffStruError", "GibbsSampler", "LatentState",
    "NumericError", "ObservedNetwork", "PosteriorEstimate", "PredictionResult", "PriorConfig",
    "SamplerConfig", "ShapeMismatchError", "build_prior", "generate_from_model", "predict", "run_gibbs",
]
