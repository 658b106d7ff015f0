"""Penalized likelihood / maximum a posteriori wrapper."""

from __future__ import annotations

from typing import Callable, NamedTuple

import numpy as np

from ..estimation import LossPair, LossTerms


class PenaltyValue(NamedTuple):
    value: float
    gradient: np.ndarray
    hessian: np.ndarray


Penalty = Callable[[np.ndarray], PenaltyValue]


def ridge(lam: float, mask=None) -> Penalty:
    """``J(theta) = lam * ||theta[mask]||^2``."""

    def penalty(theta):
        theta = np.asarray(theta, dtype=float)
        m = np.ones(theta.size) if mask is None else np.asarray(mask, dtype=float)
        return PenaltyValue(lam * float(np.sum(m * theta**2)), 2 * lam * m * theta,
                            np.diag(2 * lam * m))

    return penalty


def zero_penalty(theta):
    p = np.asarray(theta).size
    return PenaltyValue(0.0, np.zeros(p), np.zeros((p, p)))


class Penalized(LossPair):
    """Adds a penalty share to the estimating loss; the assessment loss is the
    base model's, unpenalized.

    With ``scale="map"`` each observation carries ``J(theta)/n`` so that the
    mean estimating loss is the negative log posterior over ``n``; with
    ``scale="fixed"`` each carries ``J(theta)`` as given.
    """

    same_losses = False

    def __init__(self, base: LossPair, penalty: Penalty, scale: str = "map"):
        if scale not in ("map", "fixed"):
            raise ValueError("scale must be 'map' or 'fixed'")
        self.base = base
        self.penalty = penalty
        self.scale = scale
        self.labels = base.labels
        self.estimating_is_nll = False
        self.assessment_is_discrete_logscore = base.assessment_is_discrete_logscore

    def __repr__(self):
        return f"Penalized({self.base!r}, scale={self.scale!r})"

    def validate(self, data):
        self.base.validate(data)

    def initial_theta(self, data):
        return self.base.initial_theta(data)

    def diagnose(self, data, weights=None):
        return self.base.diagnose(data, weights)

    def estimating(self, theta, data, weights=None, hessian=True):
        terms = self.base.estimating(theta, data, weights=weights, hessian=hessian)
        pen = self.penalty(np.asarray(theta, dtype=float))
        share = 1.0 / data.n if self.scale == "map" else 1.0
        H = None
        if hessian:
            total = 1.0 if weights is None else float(np.sum(weights))
            H = terms.hessian + total * share * np.asarray(pen.hessian)
        return LossTerms(terms.values + share * pen.value,
                         terms.gradients + share * np.asarray(pen.gradient)[None, :],
                         H, terms.clamped)

    def assessment(self, theta, data):
        return self.base.assessment(theta, data)

    def assessment_values(self, theta, data):
        return self.base.assessment_values(theta, data)
