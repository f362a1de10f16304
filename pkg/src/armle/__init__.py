"""Exact maximum likelihood for AR(p) models driven by stationary Gaussian noise."""

from .asymptotics import fisher_info, spectral_radius
from .errors import NumericalError, ValidationError
from .estimation import mle, mle_batch
from .innovations import InnovationSystem, levinson, system_for
from .noise import NoiseModel, covariance_sequence, parse_noise
from .state_space import ArModel

__all__ = [
    "ArModel",
    "InnovationSystem",
    "NoiseModel",
    "NumericalError",
    "ValidationError",
    "covariance_sequence",
    "fisher_info",
    "levinson",
    "mle",
    "mle_batch",
    "parse_noise",
    "spectral_radius",
    "system_for",
]
