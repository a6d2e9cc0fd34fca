"""Gamma-Bernoulli RBM for amplitude spectrograms, with Gaussian and
Bernoulli baselines and a train/reconstruct/evaluate pipeline."""

from .mathcore import DomainError, GammaParams, Rng
from .models import (
    BernRbmParams,
    DegenerateShapeError,
    GammaRbmParams,
    GaussRbmParams,
)
from .training import NormalizationStats, TrainConfig

__all__ = [
    "BernRbmParams",
    "DegenerateShapeError",
    "DomainError",
    "GammaParams",
    "GammaRbmParams",
    "GaussRbmParams",
    "NormalizationStats",
    "Rng",
    "TrainConfig",
]

__version__ = "0.1.0"
