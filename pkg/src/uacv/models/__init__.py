"""Concrete loss pairs."""

from .gaussian import (
    ASSESSMENTS,
    GaussianLinear,
    GaussianLinearParams,
    crps_gaussian,
    crps_value_and_gradient,
    discretized_probabilities,
)
from .squared import SquaredError
from .penalized import Penalized, PenaltyValue, ridge, zero_penalty
from .threshold import Threshold, ThresholdParams, category_probabilities

MODEL_NAMES = ("gaussian-linear", "threshold", "squared-error")


def gaussian_linear_losspair(covariate_dimension, assessment="continuous", coarsen_level=None):
    return GaussianLinear(covariate_dimension, assessment, coarsen_level)


def threshold_losspair(covariate_dimension, levels):
    return Threshold(covariate_dimension, levels)


def penalized_losspair(base, penalty, scale="map"):
    return Penalized(base, penalty, scale)


def aic_d(psi_bar: float, p: int, n: int) -> float:
    """Per-observation AIC with the likelihood taken on the counting measure."""
    return psi_bar + p / n


def make_model(name, covariate_dimension, levels=None, assessment=None,
               coarsen_level=None, penalty=None, penalty_scale="map"):
    """Build a loss pair from its registry name."""
    if name == "gaussian-linear":
        model = GaussianLinear(covariate_dimension, assessment or "continuous", coarsen_level)
    elif name == "threshold":
        if assessment not in (None, "discretized"):
            raise ValueError("the threshold model is assessed by its own discrete log score")
        if levels is None:
            raise ValueError("threshold model needs the number of levels")
        model = Threshold(covariate_dimension, levels)
    elif name == "squared-error":
        if assessment not in (None, "continuous"):
            raise ValueError("squared-error is assessed by its own loss")
        model = SquaredError(covariate_dimension)
    else:
        raise ValueError(f"unknown model {name!r}; choose from {MODEL_NAMES}")
    if penalty is not None:
        model = Penalized(model, penalty, penalty_scale)
    return model


__all__ = [
    "ASSESSMENTS", "MODEL_NAMES", "GaussianLinear", "GaussianLinearParams", "Penalized",
    "PenaltyValue", "SquaredError", "Threshold", "ThresholdParams", "aic_d", "category_probabilities",
    "crps_gaussian", "crps_value_and_gradient", "discretized_probabilities",
    "gaussian_linear_losspair", "make_model", "penalized_losspair", "ridge",
    "threshold_losspair", "zero_penalty",
]
