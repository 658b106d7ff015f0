"""Dense numerical kernel: Newton minimization, symmetric solves, derivative checks."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import linalg


class SingularMatrixError(np.linalg.LinAlgError):
    """Raised when a matrix is too ill-conditioned to solve against."""

    def __init__(self, name: str, condition: float):
        self.name = name
        self.condition = condition
        super().__init__(
            f"matrix {name!r} is numerically singular (condition estimate {condition:.3g})"
        )


@dataclass(frozen=True)
class ObjectiveEvaluation:
    value: float
    gradient: np.ndarray
    hessian: Optional[np.ndarray] = None


@dataclass(frozen=True)
class OptimizerSettings:
    gradient_tolerance: float = 1e-8
    max_iterations: int = 200
    line_search_shrink: float = 0.5
    hessian_ridge: float = 0.0

    def __post_init__(self):
        if not self.gradient_tolerance > 0:
            raise ValueError("gradient_tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be positive")
        if not 0 < self.line_search_shrink < 1:
            raise ValueError("line_search_shrink must lie in (0, 1)")
        if self.hessian_ridge < 0:
            raise ValueError("hessian_ridge must be non-negative")


@dataclass(frozen=True)
class MinimizeResult:
    theta: np.ndarray
    converged: bool
    iterations: int
    value: float
    gradient_norm: float

    # unpacks as (theta_hat, converged, iterations)
    def __iter__(self):
        return iter((self.theta, self.converged, self.iterations))


Objective = Callable[[np.ndarray], ObjectiveEvaluation]

ARMIJO_C = 1e-4
_RIDGE_START = 1e-8


def _newton_direction(gradient, hessian, ridge):
    """Solve (H + ridge I) d = -g, doubling the ridge until Cholesky succeeds."""
    p = gradient.size
    eye = np.eye(p)
    lam = ridge
    scale = max(1.0, float(np.max(np.abs(np.diag(hessian))))) if p else 1.0
    while True:
        try:
            factor = linalg.cho_factor(hessian + lam * eye, check_finite=True)
            return -linalg.cho_solve(factor, gradient), lam
        except linalg.LinAlgError:
            lam = _RIDGE_START if lam == 0 else 2.0 * lam
            if lam > 1e12 * scale:
                # give up on curvature and fall back to steepest descent
                return -gradient, lam


def minimize(
    objective: Objective,
    theta0,
    settings: OptimizerSettings = OptimizerSettings(),
) -> MinimizeResult:
    """Damped Newton minimization with Armijo backtracking.

    Convergence is declared when the sup-norm of the gradient drops below
    ``settings.gradient_tolerance``. On non-convergence the best iterate is
    returned with ``converged=False``.
    """
    theta = np.array(theta0, dtype=float, copy=True)
    ev = objective(theta)
    if not np.isfinite(ev.value):
        raise FloatingPointError("objective is not finite at the starting point")
    value = float(ev.value)
    grad = np.asarray(ev.gradient, dtype=float)

    for it in range(settings.max_iterations + 1):
        gnorm = float(np.max(np.abs(grad))) if grad.size else 0.0
        if gnorm < settings.gradient_tolerance:
            return MinimizeResult(theta, True, it, value, gnorm)
        if it == settings.max_iterations:
            break
        if ev.hessian is None:
            raise ValueError("Newton minimization requires the objective Hessian")
        direction, _ = _newton_direction(grad, np.asarray(ev.hessian, float),
                                         settings.hessian_ridge)
        slope = float(grad @ direction)
        if slope >= 0:
            direction, slope = -grad, -float(grad @ grad)

        step = 1.0
        slack = 10 * np.finfo(float).eps * max(1.0, abs(value))
        while True:
            candidate = theta + step * direction
            trial = objective(candidate)
            if np.isfinite(trial.value) and (
                trial.value <= value + ARMIJO_C * step * slope + slack
            ):
                break
            step *= settings.line_search_shrink
            if step < 1e-20:
                return MinimizeResult(theta, False, it, value, gnorm)
        theta, ev = candidate, trial
        value, grad = float(ev.value), np.asarray(ev.gradient, dtype=float)

    gnorm = float(np.max(np.abs(grad))) if grad.size else 0.0
    return MinimizeResult(theta, False, settings.max_iterations, value, gnorm)


def solve_symmetric(H, B, name: str = "H", max_condition: float = 1e12) -> np.ndarray:
    """Solve ``H X = B`` for symmetric ``H``.

    Cholesky is tried first; indefinite matrices fall back to a Bunch-Kaufman
    factorization. Raises :class:`SingularMatrixError` naming ``name`` when the
    condition estimate exceeds ``max_condition``.
    """
    H = np.atleast_2d(np.asarray(H, dtype=float))
    B = np.asarray(B, dtype=float)
    if H.shape[0] == 0:
        return np.zeros_like(B)
    if not np.all(np.isfinite(H)):
        raise SingularMatrixError(name, np.inf)
    cond = np.linalg.cond(H)
    if not np.isfinite(cond) or cond > max_condition:
        raise SingularMatrixError(name, float(cond))
    try:
        return linalg.cho_solve(linalg.cho_factor(H), B)
    except linalg.LinAlgError:
        return linalg.solve(H, B, assume_a="sym")


def _fd_steps(theta):
    return 1e-6 * (1.0 + np.abs(theta))


def _relative(analytic, numeric):
    return np.abs(analytic - numeric) / np.maximum(np.abs(numeric), 1.0)


def check_gradient(objective: Objective, theta) -> float:
    """Worst relative discrepancy between analytic and central-difference gradients.

    Relative errors use ``max(|numeric|, 1)`` as the denominator so that
    vanishing gradient components are compared absolutely.
    """
    theta = np.asarray(theta, dtype=float)
    analytic = np.asarray(objective(theta).gradient, dtype=float)
    numeric = np.empty_like(theta)
    for j, h in enumerate(_fd_steps(theta)):
        e = np.zeros_like(theta)
        e[j] = h
        numeric[j] = (objective(theta + e).value - objective(theta - e).value) / (2 * h)
    return float(np.max(_relative(analytic, numeric))) if theta.size else 0.0


def check_hessian(objective: Objective, theta) -> float:
    """Like :func:`check_gradient`, differencing the analytic gradient.

    An asymmetric analytic Hessian is reported through a warning and its
    relative asymmetry is folded into the returned error.
    """
    theta = np.asarray(theta, dtype=float)
    analytic = np.asarray(objective(theta).hessian, dtype=float)
    p = theta.size
    numeric = np.empty((p, p))
    for j, h in enumerate(_fd_steps(theta)):
        e = np.zeros_like(theta)
        e[j] = h
        gp = np.asarray(objective(theta + e).gradient, dtype=float)
        gm = np.asarray(objective(theta - e).gradient, dtype=float)
        numeric[:, j] = (gp - gm) / (2 * h)
    numeric = 0.5 * (numeric + numeric.T)
    err = float(np.max(_relative(analytic, numeric))) if p else 0.0
    asym = float(np.max(_relative(analytic, analytic.T))) if p else 0.0
    if asym > 1e-10:
        warnings.warn(f"analytic Hessian is not symmetric (relative asymmetry {asym:.3g})")
    return max(err, asym)
