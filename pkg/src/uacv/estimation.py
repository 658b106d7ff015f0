"""M-estimation core: datasets, the loss-pair contract, fitting, and the
per-observation quantities consumed by the UACV correction."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence, Union

import numpy as np

from .numopt import ObjectiveEvaluation, OptimizerSettings, minimize


class ConvergenceError(RuntimeError):
    """The optimizer stopped without reaching the gradient tolerance."""

    def __init__(self, message, theta=None, iterations=None, gradient_norm=None):
        super().__init__(message)
        self.theta = theta
        self.iterations = iterations
        self.gradient_norm = gradient_norm


class DataModelMismatch(ValueError):
    """A loss is undefined (non-finite) on some observation."""

    def __init__(self, message, row: int):
        super().__init__(f"{message} (row {row})")
        self.row = row


class Observation(NamedTuple):
    response: Union[int, float]
    covariates: np.ndarray


@dataclass(frozen=True)
class Dataset:
    """``n`` responses with an ``n x k`` covariate matrix.

    ``ordinal_levels`` is the top level ``L`` when responses are ordinal
    (levels ``0..L``); ``None`` for real-valued responses.
    """

    y: np.ndarray
    X: np.ndarray
    ordinal_levels: Optional[int] = None

    def __post_init__(self):
        y = np.asarray(self.y)
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, 1) if X.size == y.size and y.size else X.reshape(y.size, 0)
        if y.ndim != 1:
            raise ValueError("responses must be one-dimensional")
        if X.shape[0] != y.size:
            raise ValueError(f"{y.size} responses but {X.shape[0]} covariate rows")
        if y.size < 2:
            raise ValueError("a dataset needs at least two observations")
        bad = np.flatnonzero(~np.all(np.isfinite(X), axis=1))
        if bad.size:
            raise ValueError(f"non-finite covariate at row {bad[0]}")
        if self.ordinal_levels is not None:
            L = int(self.ordinal_levels)
            if L < 1:
                raise ValueError("ordinal_levels must be at least 1")
            yi = np.asarray(y, dtype=float)
            bad = np.flatnonzero((yi != np.round(yi)) | (yi < 0) | (yi > L))
            if bad.size:
                raise ValueError(f"response at row {bad[0]} is not an ordinal level in 0..{L}")
            y = yi.astype(np.int64)
        else:
            y = np.asarray(y, dtype=float)
            bad = np.flatnonzero(~np.isfinite(y))
            if bad.size:
                raise ValueError(f"non-finite response at row {bad[0]}")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "X", X)

    @property
    def n(self) -> int:
        return self.y.size

    @property
    def covariate_dimension(self) -> int:
        return self.X.shape[1]

    def __len__(self):
        return self.n

    def __getitem__(self, i) -> Observation:
        return Observation(self.y[i].item(), self.X[i])

    def subset(self, rows) -> "Dataset":
        return Dataset(self.y[rows], self.X[rows], self.ordinal_levels)


class LossTerms(NamedTuple):
    """Per-observation loss values and gradients at one parameter value.

    ``hessian`` is the weighted sum of per-observation Hessians (weights default
    to ``1/n``, giving the Hessian of the mean loss); ``None`` when not computed.
    ``clamped`` counts probabilities floored before taking logs.
    """

    values: np.ndarray
    gradients: np.ndarray
    hessian: Optional[np.ndarray] = None
    clamped: int = 0


class LossPair:
    """An estimating loss and an assessment loss over a common parameter.

    Subclasses implement :meth:`estimating` and :meth:`assessment`, both
    vectorized over the rows of a :class:`Dataset`.
    """

    labels: Sequence[str] = ()
    #: True when the assessment loss is the estimating loss
    same_losses: bool = False
    #: True when the estimating loss is a negative log density
    estimating_is_nll: bool = True
    #: True when the assessment loss is a negative log probability of the level
    assessment_is_discrete_logscore: bool = False

    @property
    def p(self) -> int:
        return len(self.labels)

    def validate(self, data: Dataset) -> None:
        pass

    def initial_theta(self, data: Dataset) -> np.ndarray:
        return np.zeros(self.p)

    def estimating(self, theta, data: Dataset, weights=None, hessian=True) -> LossTerms:
        raise NotImplementedError

    def assessment(self, theta, data: Dataset) -> LossTerms:
        raise NotImplementedError

    def assessment_values(self, theta, data: Dataset) -> np.ndarray:
        return self.assessment(theta, data).values

    def diagnose(self, data: Dataset, weights=None) -> str:
        """Describe a data condition that puts the estimate on the parameter
        boundary (so no interior minimizer exists), or return ``""``."""
        return ""


def _weights(n, weights):
    if weights is None:
        return np.full(n, 1.0 / n)
    return np.asarray(weights, dtype=float)


def mean_objective(loss_pair: LossPair, data: Dataset, weights=None):
    """The estimating function ``theta -> sum_i w_i phi(theta, Y_i)`` as an optimizer objective."""
    w = _weights(data.n, weights)

    def objective(theta):
        terms = loss_pair.estimating(theta, data, weights=w)
        return ObjectiveEvaluation(
            float(w @ terms.values), w @ terms.gradients, terms.hessian
        )

    return objective


@dataclass(frozen=True)
class FitResult:
    theta_hat: np.ndarray
    converged: bool
    hessian_phi: np.ndarray
    per_obs_phi_gradients: np.ndarray
    per_obs_phi: np.ndarray
    phi_bar: float
    n: int
    iterations: int = 0
    gradient_norm: float = 0.0
    clamped: int = 0
    labels: tuple = field(default=())

    @property
    def p(self) -> int:
        return self.theta_hat.size


def _first_nonfinite(values):
    bad = np.flatnonzero(~np.isfinite(values))
    return int(bad[0]) if bad.size else None


def fit(
    loss_pair: LossPair,
    dataset: Dataset,
    theta0=None,
    settings: OptimizerSettings = OptimizerSettings(),
    weights=None,
    raise_on_failure: bool = True,
) -> FitResult:
    """Minimize the (weighted) mean estimating loss.

    ``weights`` default to ``1/n``; leave-one-out refits pass ``1/(n-1)`` with
    a zero at the omitted row. Non-convergence raises
    :class:`ConvergenceError` unless ``raise_on_failure`` is false.
    """
    loss_pair.validate(dataset)
    theta0 = loss_pair.initial_theta(dataset) if theta0 is None else np.asarray(theta0, float)
    if theta0.shape != (loss_pair.p,):
        raise ValueError(f"theta0 must have length {loss_pair.p}, got shape {theta0.shape}")
    w = _weights(dataset.n, weights)

    start = loss_pair.estimating(theta0, dataset, weights=w, hessian=False)
    row = _first_nonfinite(start.values[w != 0])
    if row is not None:
        raise DataModelMismatch("estimating loss undefined at the starting point",
                                int(np.flatnonzero(w != 0)[row]))

    result = minimize(mean_objective(loss_pair, dataset, w), theta0, settings)
    hint = loss_pair.diagnose(dataset, w)
    if hint:
        result = result.__class__(result.theta, False, result.iterations, result.value,
                                  result.gradient_norm)
    if not result.converged and raise_on_failure:
        raise ConvergenceError(
            f"no convergence after {result.iterations} iterations "
            f"(gradient sup-norm {result.gradient_norm:.3g})" + (f": {hint}" if hint else ""),
            result.theta, result.iterations, result.gradient_norm,
        )

    terms = loss_pair.estimating(result.theta, dataset, weights=w)
    row = _first_nonfinite(terms.values)
    if row is not None:
        raise DataModelMismatch("estimating loss undefined at the fitted parameter", row)
    return FitResult(
        theta_hat=result.theta,
        converged=result.converged,
        hessian_phi=terms.hessian,
        per_obs_phi_gradients=terms.gradients,
        per_obs_phi=terms.values,
        phi_bar=float(w @ terms.values),
        n=dataset.n,
        iterations=result.iterations,
        gradient_norm=result.gradient_norm,
        clamped=terms.clamped,
        labels=tuple(loss_pair.labels),
    )


def per_observation_d(fit: FitResult) -> np.ndarray:
    """Rows ``d_i = grad phi(theta_hat, Y_i) / (n - 1)``."""
    if fit.n < 2:
        raise ValueError("per-observation d needs n >= 2")
    return fit.per_obs_phi_gradients / (fit.n - 1)


def per_observation_v(loss_pair: LossPair, fit: FitResult, dataset: Dataset) -> np.ndarray:
    """Rows ``v_i = grad psi(theta_hat, Y_i)``."""
    if loss_pair.same_losses:
        return fit.per_obs_phi_gradients
    terms = loss_pair.assessment(fit.theta_hat, dataset)
    row = _first_nonfinite(terms.values)
    if row is not None:
        raise DataModelMismatch("assessment loss undefined", row)
    return terms.gradients
