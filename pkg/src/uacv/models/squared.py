"""Least squares: ``phi = psi = (y - z beta)^2`` with an intercept column."""

import numpy as np

from ..estimation import LossPair, LossTerms
from .gaussian import design


class SquaredError(LossPair):
    same_losses = True
    estimating_is_nll = False

    def __init__(self, covariate_dimension: int = 0):
        self.covariate_dimension = int(covariate_dimension)
        self.labels = tuple(["beta0"] + [f"beta{j + 1}" for j in range(self.covariate_dimension)])

    def __repr__(self):
        return f"SquaredError({self.covariate_dimension})"

    def initial_theta(self, data):
        beta, *_ = np.linalg.lstsq(design(data.X), data.y.astype(float), rcond=None)
        return beta

    def estimating(self, theta, data, weights=None, hessian=True):
        Z = design(data.X)
        r = data.y - Z @ np.asarray(theta, dtype=float)
        H = None
        if hessian:
            w = np.full(data.n, 1.0 / data.n) if weights is None else np.asarray(weights, float)
            H = 2 * (Z * w[:, None]).T @ Z
        return LossTerms(r * r, -2 * r[:, None] * Z, H)

    def assessment(self, theta, data):
        return self.estimating(theta, data, hessian=False)
