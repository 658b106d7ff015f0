"""Leave-one-out crossvalidation, its universal approximation (UACV), the
TIC/AIC reductions and tracking intervals for risk differences."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import ndtri

from .estimation import (
    ConvergenceError,
    Dataset,
    FitResult,
    LossPair,
    fit as fit_model,
    per_observation_d,
    per_observation_v,
)
from .numopt import OptimizerSettings, solve_symmetric


@dataclass(frozen=True)
class CriterionReport:
    psi_bar: float
    correction: float
    uacv: float
    per_obs_psi: np.ndarray
    kappa_hat: float
    n: int
    p: int
    exact_cv: Optional[float] = None
    aic_like: Optional[float] = None


@dataclass(frozen=True)
class RiskDifferenceReport:
    d_uacv: float
    omega_hat: float
    alpha: float
    lower: float
    upper: float
    n: int

    @property
    def width(self) -> float:
        return self.upper - self.lower


def _sd(x) -> float:
    x = np.asarray(x, dtype=float)
    return float(np.std(x, ddof=1)) if x.size > 1 else 0.0


def uacv(fit: FitResult, v, d, psi) -> CriterionReport:
    """Assemble UACV = Psi + Trace(H^-1 K) with K = n^-1 sum_i v_i d_i^T.

    ``psi`` holds the per-observation assessment losses at ``theta_hat``.
    A singular estimating-function Hessian raises
    :class:`~uacv.numopt.SingularMatrixError`; penalizing the estimator
    usually restores a usable criterion.
    """
    v = np.asarray(v, dtype=float)
    d = np.asarray(d, dtype=float)
    psi = np.asarray(psi, dtype=float)
    n = fit.n
    if v.shape[0] != n or d.shape[0] != n or psi.shape != (n,):
        raise ValueError("v, d and psi must have one row per observation")
    K = v.T @ d / n
    correction = float(np.trace(solve_symmetric(fit.hessian_phi, K, name="hessian_phi")))
    psi_bar = float(np.mean(psi))
    return CriterionReport(
        psi_bar=psi_bar,
        correction=correction,
        uacv=psi_bar + correction,
        per_obs_psi=psi,
        kappa_hat=_sd(psi),
        n=n,
        p=fit.p,
        aic_like=psi_bar + fit.p / n,
    )


def assess(loss_pair: LossPair, dataset: Dataset, fit: FitResult) -> CriterionReport:
    """UACV report for a fitted loss pair, computing v, d and psi itself."""
    d = per_observation_d(fit)
    v = per_observation_v(loss_pair, fit, dataset)
    psi = fit.per_obs_phi if loss_pair.same_losses else \
        loss_pair.assessment_values(fit.theta_hat, dataset)
    return uacv(fit, v, d, psi)


@dataclass(frozen=True)
class LOOResult:
    cv: float
    per_obs_psi: np.ndarray
    thetas: np.ndarray
    iterations: np.ndarray
    gradient_norms: np.ndarray
    cold_restarts: int

    @property
    def worst_index(self) -> int:
        return int(np.argmax(self.gradient_norms))


def _subfit(loss_pair, dataset, i, warm, settings):
    n = dataset.n
    w = np.full(n, 1.0 / (n - 1))
    w[i] = 0.0
    res = fit_model(loss_pair, dataset, warm, settings, weights=w, raise_on_failure=False)
    cold = False
    if not res.converged:
        cold = True
        res = fit_model(loss_pair, dataset, None, settings, weights=w, raise_on_failure=False)
        if not res.converged:
            raise ConvergenceError(
                f"leave-one-out subfit without observation {i} did not converge",
                res.theta_hat, res.iterations, res.gradient_norm,
            )
    return res, cold


def loocv_subfits(
    loss_pair: LossPair,
    dataset: Dataset,
    fit: FitResult,
    settings: OptimizerSettings = OptimizerSettings(),
    threads: int = 1,
) -> LOOResult:
    """Run all ``n`` leave-one-out refits, warm-started at ``theta_hat``."""
    n = dataset.n

    def one(i):
        res, cold = _subfit(loss_pair, dataset, i, fit.theta_hat, settings)
        psi_i = loss_pair.assessment_values(res.theta_hat, dataset)[i]
        return psi_i, res.theta_hat, res.iterations, res.gradient_norm, cold

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            out = list(pool.map(one, range(n)))
    else:
        out = [one(i) for i in range(n)]

    psi = np.array([o[0] for o in out])
    return LOOResult(
        # fixed summation order regardless of the worker count
        cv=float(np.sum(psi) / n),
        per_obs_psi=psi,
        thetas=np.array([o[1] for o in out]),
        iterations=np.array([o[2] for o in out]),
        gradient_norms=np.array([o[3] for o in out]),
        cold_restarts=sum(o[4] for o in out),
    )


def exact_loocv(loss_pair, dataset, fit, settings=OptimizerSettings(), threads=1) -> float:
    """Exact leave-one-out crossvalidation ``n^-1 sum_i psi(theta_{-i}, Y_i)``."""
    return loocv_subfits(loss_pair, dataset, fit, settings, threads).cv


def tic_aic_reduction(loss_pair: LossPair, fit: FitResult, v, d, psi=None):
    """Return ``(tic_normalized, aic_normalized)`` for a likelihood loss pair.

    Both are on the per-observation scale: TIC/(2n) and AIC/(2n).
    """
    if not (loss_pair.same_losses and loss_pair.estimating_is_nll):
        raise ValueError("TIC/AIC reduction needs estimating and assessment losses "
                         "both equal to the negative log density")
    psi = fit.per_obs_phi if psi is None else psi
    report = uacv(fit, v, d, psi)
    return report.uacv, report.psi_bar + fit.p / fit.n


def normal_quantile(u: float) -> float:
    return float(ndtri(u))


def tracking_interval(d: float, omega: float, n: int, alpha: float = 0.05):
    """Bounds ``d -/+ z_{1-alpha/2} omega n^{-1/2}``."""
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    half = float(normal_quantile(1 - alpha / 2) * omega / math.sqrt(n))
    return d - half, d + half


def risk_difference(report_g: CriterionReport, report_h: CriterionReport,
                    alpha: float = 0.05) -> RiskDifferenceReport:
    """Estimated risk difference g - h with its tracking interval."""
    if report_g.n != report_h.n:
        raise ValueError(f"reports cover different samples (n={report_g.n} vs n={report_h.n})")
    d = report_g.uacv - report_h.uacv
    omega = _sd(report_g.per_obs_psi - report_h.per_obs_psi)
    lower, upper = tracking_interval(d, omega, report_g.n, alpha)
    return RiskDifferenceReport(d, omega, alpha, lower, upper, report_g.n)


def omega_vs_kappa_diagnostic(report_g: CriterionReport, report_h: CriterionReport):
    """``(omega_hat, kappa_g, kappa_h)``: paired vs marginal dispersions."""
    if report_g.n != report_h.n:
        raise ValueError("reports cover different samples")
    omega = _sd(report_g.per_obs_psi - report_h.per_obs_psi)
    return omega, report_g.kappa_hat, report_h.kappa_hat


def magnitude_label(d: float) -> str:
    """Qualitative size of a risk difference by its decimal order."""
    a = abs(d)
    if a >= 10 ** -1.5:
        return "large"
    if a >= 10 ** -2.5:
        return "moderate"
    if a >= 10 ** -3.5:
        return "small"
    return "negligible"
