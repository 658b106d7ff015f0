"""Ordinal-data simulation study: threshold vs. linear-approximation estimators.

Data come from a latent ``Lambda = b0 + b1 X1 + b2 X2 + eps`` thresholded at
equidistant cutoffs chosen so that both outer levels and the first inner
level carry the same probability. Each replication fits both estimators,
computes UACV / AIC_d / naive AIC, and estimates the true expected cross
entropy of each fitted distribution by Monte Carlo.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import brentq
from scipy.special import ndtr, ndtri

from .criteria import CriterionReport, assess, risk_difference
from .estimation import ConvergenceError, DataModelMismatch, Dataset, fit
from .models import GaussianLinear, Threshold, aic_d
from .numopt import OptimizerSettings, SingularMatrixError

RNG_NAME = "numpy PCG64 (SeedSequence(seed, spawn_key=(replicate, stream)))"
CUTOFF_BASES = ("conditional", "marginal")
SAMPLE_STREAM, ECE_STREAM = 0, 1
MAX_FAILURE_RATE = 0.02


class DesignError(ValueError):
    pass


class SimulationFailure(RuntimeError):
    def __init__(self, message, table=None):
        super().__init__(message)
        self.table = table


@dataclass(frozen=True)
class SimulationDesign:
    levels: int
    beta0: float
    beta1: float
    beta2: float
    sigma2: float
    n: int = 300
    replications: int = 500
    seed: int = 20130101
    mc_size: int = 1_000_000
    cutoff_basis: str = "conditional"
    fixed_cutoffs: Optional[tuple] = None

    def __post_init__(self):
        if self.cutoff_basis not in CUTOFF_BASES:
            raise DesignError(f"cutoff_basis: choose from {CUTOFF_BASES}")
        if self.levels < 2:
            raise DesignError("levels: need at least two cutoffs (L >= 2)")
        if not self.sigma2 > 0:
            raise DesignError("sigma2: must be positive")
        if self.n < 2:
            raise DesignError("n: need at least two observations")
        if self.replications < 1:
            raise DesignError("replications: must be positive")
        if self.mc_size < 1:
            raise DesignError("mc_size: must be positive")
        if not 0 <= self.seed < 2**64:
            raise DesignError("seed: must be a 64-bit unsigned integer")

    @property
    def latent_sd(self) -> float:
        return math.sqrt(self.beta1**2 + self.beta2**2 + self.sigma2)

    @property
    def cutoff_sd(self) -> float:
        """Scale of the latent law the cutoff equations are solved under.

        ``conditional`` uses the latent at the covariate means,
        ``N(beta0, sigma2)``; ``marginal`` integrates the covariates out,
        ``N(beta0, beta1^2 + beta2^2 + sigma2)``.
        """
        return math.sqrt(self.sigma2) if self.cutoff_basis == "conditional" else self.latent_sd

    def describe_cutoffs(self) -> str:
        return f"cutoff equations solved on N(beta0, {self.cutoff_sd ** 2:.6g}) ({self.cutoff_basis} latent)"

    @cached_property
    def cutoffs(self) -> np.ndarray:
        return solve_cutoffs(self)

    def with_(self, **changes) -> "SimulationDesign":
        return replace(self, **changes)


def small_design(**overrides) -> SimulationDesign:
    """Five levels, strongly non-linear in the latent scale."""
    params = dict(levels=4, beta0=1.0, beta1=-2.1, beta2=-3.7, sigma2=4.0)
    return SimulationDesign(**{**params, **overrides})


def large_design(**overrides) -> SimulationDesign:
    """Twenty levels."""
    params = dict(levels=19, beta0=1.0, beta1=-0.3, beta2=-1.7, sigma2=4.0)
    return SimulationDesign(**{**params, **overrides})


def _cutoffs_for_tail(q, design):
    s = design.cutoff_sd
    half = -s * ndtri(q)
    return design.beta0 + np.linspace(-half, half, design.levels)


def solve_cutoffs(design: SimulationDesign) -> np.ndarray:
    """Equidistant cutoffs, symmetric about ``beta0``, whose outer tails and
    first inner level carry the same probability under the latent law
    selected by ``design.cutoff_basis``."""
    if design.fixed_cutoffs is not None:
        c = np.asarray(design.fixed_cutoffs, dtype=float)
        if c.size != design.levels or np.any(np.diff(c) <= 0):
            raise DesignError(f"fixed_cutoffs: need {design.levels} strictly increasing values")
        return c
    mu, s = design.beta0, design.cutoff_sd

    def residual(q):
        c = _cutoffs_for_tail(q, design)
        return (ndtr((c[1] - mu) / s) - ndtr((c[0] - mu) / s)) - q

    lo, hi = 1e-12, 0.5 - 1e-12
    try:
        q = brentq(residual, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    except ValueError as exc:
        raise DesignError(f"levels: cutoff equations cannot be bracketed ({exc})") from exc
    return _cutoffs_for_tail(q, design)


def level_probabilities(design: SimulationDesign, sd: Optional[float] = None) -> np.ndarray:
    """Probabilities of levels ``0..L`` for a latent ``N(beta0, sd^2)``.

    ``sd`` defaults to the marginal latent scale, giving the marginal level
    distribution of generated data.
    """
    sd = design.latent_sd if sd is None else sd
    edges = np.concatenate([[-np.inf], design.cutoffs, [np.inf]])
    return np.diff(ndtr((edges - design.beta0) / sd))


def stream(seed: int, replicate: int, purpose: int) -> np.random.Generator:
    """Independent generator for one (replicate, purpose) pair."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(replicate, purpose))
    return np.random.Generator(np.random.PCG64(ss))


def standard_normal(rng: np.random.Generator, size) -> np.ndarray:
    """Normal draws by inverse-CDF transform of the uniform stream."""
    # random() returns k / 2**53; the half-step offset keeps u inside (0, 1)
    u = rng.random(size) + 2.0**-54
    return ndtri(u)


def draw(design: SimulationDesign, rng: np.random.Generator, m: int):
    """``(X, y)`` for ``m`` observations from the true threshold model."""
    z = standard_normal(rng, (m, 3))
    X = z[:, :2]
    latent = design.beta0 + X @ np.array([design.beta1, design.beta2]) \
        + math.sqrt(design.sigma2) * z[:, 2]
    y = np.searchsorted(design.cutoffs, latent, side="right")
    return X, y


def generate_sample(design: SimulationDesign, replicate_index: int) -> Dataset:
    X, y = draw(design, stream(design.seed, replicate_index, SAMPLE_STREAM), design.n)
    return Dataset(y, X, ordinal_levels=design.levels)


@dataclass(frozen=True)
class ECEEstimate:
    value: float
    standard_error: float
    infinite: int = 0


FittedDistribution = Callable[[np.ndarray, np.ndarray], np.ndarray]


def fitted_distribution(loss_pair, theta) -> FittedDistribution:
    """``(X, y) -> P(Y = y | X)`` under a fitted discrete model."""
    theta = np.asarray(theta, dtype=float)

    def prob(X, y):
        data = Dataset(y, X, ordinal_levels=loss_pair_levels(loss_pair, y))
        return np.exp(-loss_pair.assessment_values(theta, data))

    return prob


def loss_pair_levels(loss_pair, y):
    return getattr(loss_pair, "levels", None) or int(np.max(y, initial=1))


def true_ece(fitted: FittedDistribution, design: SimulationDesign, mc_size: Optional[int] = None,
             rng: Optional[np.random.Generator] = None, sample=None) -> ECEEstimate:
    """Monte Carlo expected cross entropy of a fitted distribution.

    Draws ``mc_size`` fresh observations from the true design (or uses
    ``sample``) and averages ``-log`` of the fitted probability of each
    drawn level. Zero probabilities count as infinite loss and are flagged.
    """
    if sample is None:
        mc_size = design.mc_size if mc_size is None else mc_size
        rng = stream(design.seed, 0, ECE_STREAM) if rng is None else rng
        sample = draw(design, rng, mc_size)
    X, y = sample
    p = np.asarray(fitted(X, y), dtype=float)
    zero = p <= 0
    if zero.any():
        return ECEEstimate(math.inf, math.nan, int(zero.sum()))
    loss = -np.log(p)
    return ECEEstimate(float(loss.mean()), float(loss.std(ddof=1) / math.sqrt(loss.size)))


@dataclass(frozen=True)
class ModelOutcome:
    model: str
    p: int
    report: CriterionReport
    uacv: float
    aic_d: float
    aic: float
    ece: float
    ece_se: float


def _models(design: SimulationDesign, names):
    out = {}
    for name in names:
        if name == "linear":
            out[name] = GaussianLinear(2, "discretized")
        elif name == "threshold":
            out[name] = Threshold(2, design.levels)
        else:
            raise ValueError(f"unknown simulation model {name!r}")
    return out


def run_replication(design: SimulationDesign, replicate_index: int,
                    models: Sequence[str] = ("linear", "threshold"),
                    settings: OptimizerSettings = OptimizerSettings(),
                    ece_override=None):
    """Fit every model on one generated sample.

    Returns ``{model: ModelOutcome}``. The Monte Carlo truth uses one draw
    shared by all models of the replication.
    """
    data = generate_sample(design, replicate_index)
    pairs = _models(design, models)
    mc = None
    if ece_override is None:
        mc = draw(design, stream(design.seed, replicate_index, ECE_STREAM), design.mc_size)
    outcomes = {}
    for name, lp in pairs.items():
        fr = fit(lp, data, settings=settings)
        report = assess(lp, data, fr)
        a_d = aic_d(report.psi_bar, fr.p, data.n)
        # naive AIC takes the likelihood of the estimating density as is
        naive = fr.phi_bar + fr.p / data.n
        outcome = ModelOutcome(name, fr.p, report, report.uacv, a_d, naive, math.nan, math.nan)
        if ece_override is not None:
            ece = ECEEstimate(float(ece_override(outcome)), 0.0)
        else:
            ece = true_ece(fitted_distribution(lp, fr.theta_hat), design, sample=mc)
        outcomes[name] = replace(outcome, ece=ece.value, ece_se=ece.standard_error)
    return outcomes


COLUMNS = ("ECE", "UACV", "AIC_d", "AIC")


@dataclass(frozen=True)
class ReplicationTable:
    """Replication means per model, their biases against ECE, and the
    difference row (first model minus second)."""

    design: SimulationDesign
    models: tuple
    means: dict
    difference: dict
    completed: int
    failures: int
    records: dict = field(repr=False, default_factory=dict)
    failed_indices: tuple = ()

    @property
    def failure_rate(self) -> float:
        return self.failures / max(self.completed + self.failures, 1)

    def bias(self, model, criterion):
        row = self.difference if model == "difference" else self.means[model]
        return row[criterion] - row["ECE"]

    def rows(self):
        """``(label, ECE, UACV, AIC_d, AIC, bias UACV, bias AIC_d, bias AIC)`` tuples."""
        labels = list(self.models) + (["difference"] if len(self.models) == 2 else [])
        out = []
        for label in labels:
            row = self.difference if label == "difference" else self.means[label]
            vals = [row[c] for c in COLUMNS]
            out.append((label, *vals, *[row[c] - row["ECE"] for c in COLUMNS[1:]]))
        return out


def _replication_or_failure(args):
    design, idx, models, settings = args
    try:
        return idx, run_replication(design, idx, models, settings)
    except (ConvergenceError, SingularMatrixError, DataModelMismatch) as exc:
        return idx, exc


def run_replications(design: SimulationDesign, models: Sequence[str] = ("linear", "threshold"),
                     settings: OptimizerSettings = OptimizerSettings(), workers: int = 1,
                     start: int = 0, ece_override=None,
                     max_failure_rate: float = MAX_FAILURE_RATE) -> ReplicationTable:
    """Run ``design.replications`` replications and aggregate them.

    Replicate ``i`` is fully determined by ``(design.seed, i)``. Failed
    replications (non-convergence, singular Hessian) are excluded and
    counted; exceeding ``max_failure_rate`` raises :class:`SimulationFailure`.
    """
    models = tuple(models)
    indices = range(start, start + design.replications)
    if ece_override is not None:
        results = []
        for idx in indices:
            try:
                results.append((idx, run_replication(design, idx, models, settings, ece_override)))
            except (ConvergenceError, SingularMatrixError, DataModelMismatch) as exc:
                results.append((idx, exc))
    elif workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_replication_or_failure,
                                    [(design, i, models, settings) for i in indices],
                                    chunksize=max(1, design.replications // (4 * workers))))
    else:
        results = [_replication_or_failure((design, i, models, settings)) for i in indices]

    ok = [(i, r) for i, r in results if isinstance(r, dict)]
    failed = tuple(i for i, r in results if not isinstance(r, dict))
    records = {m: {c: np.array([r[m].__dict__[k] for _, r in ok])
                   for c, k in zip(COLUMNS + ("ECE_se",), ("ece", "uacv", "aic_d", "aic", "ece_se"))}
               for m in models}
    for m in models:
        records[m]["psi"] = [r[m].report.per_obs_psi for _, r in ok]
    records["index"] = np.array([i for i, _ in ok])
    means = {m: {c: float(np.mean(records[m][c])) if ok else math.nan for c in COLUMNS}
             for m in models}
    difference = {}
    if len(models) == 2:
        a, b = models
        difference = {c: means[a][c] - means[b][c] for c in COLUMNS}
    table = ReplicationTable(design, models, means, difference, len(ok), len(failed),
                             records, failed)
    if table.failure_rate > max_failure_rate:
        raise SimulationFailure(
            f"{len(failed)} of {len(results)} replications failed "
            f"({100 * table.failure_rate:.1f}% > {100 * max_failure_rate:.0f}%)", table)
    return table
