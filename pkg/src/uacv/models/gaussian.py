"""Gaussian linear regression with a choice of assessment losses.

The estimating loss is always the Gaussian negative log density in
``(beta, log_sigma)``, intercept first. Assessments:

* ``continuous`` - the same negative log density (Lebesgue measure);
* ``discretized`` - negative log of the mass gathered over the half-integer
  cell around the observed level, with open-ended outer cells;
* ``crps`` - the continuous ranked probability score;
* ``coarsened`` - negative log probability of ``Z = 1{Y > level}``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from ..estimation import Dataset, LossPair, LossTerms, Observation
from ._normal import LOG_SQRT_2PI, clamp, interval_probability, pdf, z_pdf

ASSESSMENTS = ("continuous", "discretized", "crps", "coarsened")
INV_SQRT_PI = 1.0 / np.sqrt(np.pi)


@dataclass(frozen=True)
class GaussianLinearParams:
    beta: np.ndarray
    log_sigma: float

    @property
    def sigma(self) -> float:
        return float(np.exp(self.log_sigma))

    @classmethod
    def from_theta(cls, theta):
        theta = np.asarray(theta, dtype=float)
        return cls(theta[:-1], float(theta[-1]))

    def to_theta(self):
        return np.append(self.beta, self.log_sigma)


def design(X):
    X = np.asarray(X, dtype=float)
    return np.column_stack([np.ones(X.shape[0]), X])


def cell_bounds(y, levels):
    """Half-integer cell around each level; outer cells are open-ended."""
    y = np.asarray(y, dtype=float)
    lo = np.where(y <= 0, -np.inf, y - 0.5)
    hi = np.where(y >= levels, np.inf, y + 0.5)
    return lo, hi


def discretized_probabilities(mu, sigma, levels):
    """Mass of ``N(mu, sigma^2)`` gathered on levels ``0..levels``; shape ``(m, levels+1)``."""
    mu = np.atleast_1d(np.asarray(mu, dtype=float))[:, None]
    l = np.arange(levels + 1, dtype=float)[None, :]
    lo, hi = cell_bounds(l, levels)
    return interval_probability((lo - mu) / sigma, (hi - mu) / sigma)


def interval_logscore(lo, hi, mu, log_sigma, Z):
    """``-log P(lo < Y <= hi)`` for ``Y ~ N(mu, sigma^2)`` with gradients in ``(beta, log_sigma)``."""
    sigma = np.exp(log_sigma)
    a = (lo - mu) / sigma
    b = (hi - mu) / sigma
    prob, clamped = clamp(interval_probability(a, b))
    dmu = -(pdf(b) - pdf(a)) / sigma
    ds = -(z_pdf(b) - z_pdf(a))
    grads = np.column_stack([-(dmu / prob)[:, None] * Z, -ds / prob])
    return LossTerms(-np.log(prob), grads, None, clamped)


def crps_gaussian(y, mu, sigma):
    """Closed-form CRPS of ``N(mu, sigma^2)`` at ``y`` with its ``mu`` and ``log sigma`` derivatives."""
    z = (np.asarray(y, float) - mu) / sigma
    cdf2 = 2 * ndtr(z) - 1
    dens = pdf(z)
    value = sigma * (z * cdf2 + 2 * dens - INV_SQRT_PI)
    return value, -cdf2, sigma * (2 * dens - INV_SQRT_PI)


def crps_value_and_gradient(params: GaussianLinearParams, observation: Observation):
    """CRPS of the fitted predictive at one observation, gradient in ``(beta, log_sigma)``."""
    sigma = params.sigma
    if not sigma > 0:
        raise FloatingPointError("predictive scale underflowed to zero")
    z = np.append(1.0, np.asarray(observation.covariates, dtype=float))
    mu = float(z @ params.beta)
    value, dmu, ds = crps_gaussian(observation.response, mu, sigma)
    return float(value), np.append(dmu * z, ds)


class GaussianLinear(LossPair):
    """``Y = beta_0 + x beta + eps`` fitted by maximum likelihood."""

    def __init__(self, covariate_dimension: int, assessment: str = "continuous",
                 coarsen_level: int | None = None):
        if assessment not in ASSESSMENTS:
            raise ValueError(f"unknown assessment {assessment!r}; choose from {ASSESSMENTS}")
        if assessment == "coarsened" and coarsen_level is None:
            raise ValueError("coarsened assessment needs a threshold level")
        self.covariate_dimension = int(covariate_dimension)
        self.assessment_name = assessment
        self.coarsen_level = coarsen_level
        self.labels = tuple(["beta0"] + [f"beta{j + 1}" for j in range(self.covariate_dimension)]
                            + ["log_sigma"])
        self.same_losses = assessment == "continuous"
        self.assessment_is_discrete_logscore = assessment == "discretized"

    def __repr__(self):
        return f"GaussianLinear({self.covariate_dimension}, assessment={self.assessment_name!r})"

    def validate(self, data: Dataset):
        if data.covariate_dimension != self.covariate_dimension:
            raise ValueError(f"model expects {self.covariate_dimension} covariates, "
                             f"dataset has {data.covariate_dimension}")
        if self.assessment_name in ("discretized", "coarsened") and data.ordinal_levels is None:
            raise ValueError(f"{self.assessment_name} assessment needs ordinal_levels on the dataset")

    def initial_theta(self, data: Dataset):
        Z = design(data.X)
        beta, *_ = np.linalg.lstsq(Z, data.y.astype(float), rcond=None)
        sd = np.sqrt(np.mean((data.y - Z @ beta) ** 2))
        return np.append(beta, np.log(max(sd, 1e-3)))

    def estimating(self, theta, data, weights=None, hessian=True):
        theta = np.asarray(theta, dtype=float)
        Z = design(data.X)
        s = theta[-1]
        inv_var = np.exp(-2 * s)
        r = data.y - Z @ theta[:-1]
        rs = r * inv_var
        values = LOG_SQRT_2PI + s + 0.5 * r * rs
        grads = np.column_stack([-rs[:, None] * Z, 1 - r * rs])
        H = None
        if hessian:
            w = np.full(data.n, 1.0 / data.n) if weights is None else np.asarray(weights, float)
            k = Z.shape[1]
            H = np.empty((k + 1, k + 1))
            H[:k, :k] = (Z * (w * inv_var)[:, None]).T @ Z
            H[:k, k] = H[k, :k] = 2 * (w * rs) @ Z
            H[k, k] = 2 * w @ (r * rs)
        return LossTerms(values, grads, H)

    def _bounds(self, data):
        L = data.ordinal_levels
        if self.assessment_name == "discretized":
            return cell_bounds(data.y, L)
        cut = self.coarsen_level + 0.5
        above = data.y > self.coarsen_level
        return np.where(above, cut, -np.inf), np.where(above, np.inf, cut)

    def assessment(self, theta, data):
        theta = np.asarray(theta, dtype=float)
        if self.assessment_name == "continuous":
            return self.estimating(theta, data, hessian=False)
        Z = design(data.X)
        mu = Z @ theta[:-1]
        if self.assessment_name == "crps":
            value, dmu, ds = crps_gaussian(data.y, mu, np.exp(theta[-1]))
            return LossTerms(value, np.column_stack([dmu[:, None] * Z, ds]))
        lo, hi = self._bounds(data)
        return interval_logscore(lo, hi, mu, theta[-1], Z)

    def assessment_values(self, theta, data):
        if self.assessment_name not in ("discretized", "coarsened"):
            return self.assessment(theta, data).values
        theta = np.asarray(theta, dtype=float)
        mu = design(data.X) @ theta[:-1]
        sigma = np.exp(theta[-1])
        lo, hi = self._bounds(data)
        prob, _ = clamp(interval_probability((lo - mu) / sigma, (hi - mu) / sigma))
        return -np.log(prob)
