"""Universal approximate crossvalidation for M-estimators."""

from .criteria import (
    CriterionReport,
    RiskDifferenceReport,
    assess,
    exact_loocv,
    loocv_subfits,
    omega_vs_kappa_diagnostic,
    risk_difference,
    tic_aic_reduction,
    uacv,
)
from .estimation import (
    ConvergenceError,
    DataModelMismatch,
    Dataset,
    FitResult,
    LossPair,
    LossTerms,
    fit,
    per_observation_d,
    per_observation_v,
)
from .numopt import OptimizerSettings, SingularMatrixError

__version__ = "0.1.0"
