"""Ordered-probit threshold model.

Level ``l`` is observed when the latent ``x beta + eps`` (``eps ~ N(0, 1)``)
falls in ``[c_l, c_{l+1})`` with ``c_0 = -inf`` and ``c_{L+1} = +inf``. The
latent scale is fixed to one and the intercept is absorbed by the cutoffs.
Cutoffs are parameterized as ``c_1`` followed by log-increments so that they
stay strictly increasing under unconstrained optimization.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from ..estimation import Dataset, LossPair, LossTerms
from ._normal import clamp, interval_probability, pdf, z_pdf


@dataclass(frozen=True)
class ThresholdParams:
    beta: np.ndarray
    cut1: float
    log_increments: np.ndarray

    @property
    def cutoffs(self) -> np.ndarray:
        return self.cut1 + np.concatenate([[0.0], np.cumsum(np.exp(self.log_increments))])

    @classmethod
    def from_theta(cls, theta, covariate_dimension):
        theta = np.asarray(theta, dtype=float)
        k = covariate_dimension
        return cls(theta[:k], float(theta[k]), theta[k + 1:])

    @classmethod
    def from_cutoffs(cls, beta, cutoffs):
        cutoffs = np.asarray(cutoffs, dtype=float)
        return cls(np.asarray(beta, float), float(cutoffs[0]), np.log(np.diff(cutoffs)))

    def to_theta(self):
        return np.concatenate([self.beta, [self.cut1], self.log_increments])


def category_probabilities(eta, cutoffs):
    """Level probabilities for latent means ``eta``; shape ``(m, L+1)``."""
    eta = np.atleast_1d(np.asarray(eta, dtype=float))[:, None]
    edges = np.concatenate([[-np.inf], cutoffs, [np.inf]])
    return interval_probability(edges[None, :-1] - eta, edges[None, 1:] - eta)


class Threshold(LossPair):
    """Negative log category probability as both estimating and assessment loss."""

    same_losses = True
    assessment_is_discrete_logscore = True

    def __init__(self, covariate_dimension: int, levels: int):
        if levels < 1:
            raise ValueError("threshold model needs at least two levels (L >= 1)")
        self.covariate_dimension = int(covariate_dimension)
        self.levels = int(levels)
        self.labels = tuple([f"beta{j + 1}" for j in range(self.covariate_dimension)]
                            + ["cut1"] + [f"log_inc{j + 1}" for j in range(self.levels - 1)])

    def __repr__(self):
        return f"Threshold({self.covariate_dimension}, levels={self.levels})"

    def params(self, theta) -> ThresholdParams:
        return ThresholdParams.from_theta(theta, self.covariate_dimension)

    def validate(self, data: Dataset):
        if data.ordinal_levels is None:
            raise ValueError("threshold model needs an ordinal dataset")
        if data.ordinal_levels != self.levels:
            raise ValueError(f"model has L={self.levels}, dataset declares L={data.ordinal_levels}")
        if data.covariate_dimension != self.covariate_dimension:
            raise ValueError(f"model expects {self.covariate_dimension} covariates, "
                             f"dataset has {data.covariate_dimension}")

    def empty_levels(self, data: Dataset, weights=None):
        w = None if weights is None else (np.asarray(weights) > 0).astype(float)
        counts = np.bincount(data.y, weights=w, minlength=self.levels + 1)
        return [int(l) for l in np.flatnonzero(counts == 0)]

    def initial_theta(self, data: Dataset):
        n = data.n
        counts = np.bincount(data.y, minlength=self.levels + 1).astype(float)
        cum = np.cumsum(counts)[:-1] / n
        cum = np.clip(cum, 0.5 / n, 1 - 0.5 / n)
        cutoffs = ndtri(cum)
        incs = np.maximum(np.diff(cutoffs), 1e-2)
        return np.concatenate([np.zeros(self.covariate_dimension), [cutoffs[0]], np.log(incs)])

    def _edges(self, theta, data):
        par = self.params(theta)
        cuts = par.cutoffs
        eta = data.X @ par.beta
        edges = np.concatenate([[-np.inf], cuts, [np.inf]])
        return par, cuts, eta, edges[data.y + 1] - eta, edges[data.y] - eta

    def estimating(self, theta, data, weights=None, hessian=True):
        theta = np.asarray(theta, dtype=float)
        k, L, n = self.covariate_dimension, self.levels, data.n
        par, cuts, eta, u, lo = self._edges(theta, data)
        prob, clamped = clamp(interval_probability(lo, u))

        # derivatives of u and lo in natural coordinates (beta, c_1..c_L)
        rows = np.arange(n)
        du = np.zeros((n, k + L))
        dl = np.zeros((n, k + L))
        du[:, :k] = -data.X
        dl[:, :k] = -data.X
        top = data.y < L
        du[rows[top], k + data.y[top]] = 1.0
        bottom = data.y > 0
        dl[rows[bottom], k + data.y[bottom] - 1] = 1.0

        fu, fl = pdf(u), pdf(lo)
        score = (fu[:, None] * du - fl[:, None] * dl) / prob[:, None]  # grad P / P

        # chain rule to (beta, cut1, log_increments)
        T = np.zeros((k + L, k + L))
        T[:k, :k] = np.eye(k)
        inc = np.exp(par.log_increments)
        T[k:, k] = 1.0
        for j in range(1, L):
            T[k + j:, k + j] = inc[j - 1]
        grads = -score @ T
        values = -np.log(prob)

        H = None
        if hessian:
            w = np.full(n, 1.0 / n) if weights is None else np.asarray(weights, float)
            cu = w * z_pdf(u) / prob
            cl = w * z_pdf(lo) / prob
            Hz = (du * cu[:, None]).T @ du - (dl * cl[:, None]).T @ dl \
                + (score * w[:, None]).T @ score
            H = T.T @ Hz @ T
            # curvature of the exponential increments
            gc = -(w @ score)[k:]
            tail = np.cumsum(gc[::-1])[::-1]
            for j in range(1, L):
                H[k + j, k + j] += inc[j - 1] * tail[j]
        return LossTerms(values, grads, H, clamped)

    def assessment(self, theta, data):
        return self.estimating(theta, data, hessian=False)

    def assessment_values(self, theta, data):
        _, _, _, u, lo = self._edges(np.asarray(theta, float), data)
        prob, _ = clamp(interval_probability(lo, u))
        return -np.log(prob)

    def probabilities(self, theta, X):
        par = self.params(theta)
        return category_probabilities(np.asarray(X, float) @ par.beta, par.cutoffs)

    def diagnose(self, data: Dataset, weights=None) -> str:
        empty = self.empty_levels(data, weights)
        if empty:
            return (f"levels {empty} have no observations; the adjacent cutoff "
                    "increments drift toward a boundary")
        return ""
