import numpy as np
import pytest

from uacv.estimation import Dataset, LossPair, LossTerms
from uacv.models import GaussianLinear
from uacv.models._normal import LOG_SQRT_2PI


class KnownScaleGaussian(LossPair):
    """Mean-only Gaussian log density with unit variance (p = 1)."""

    labels = ("mu",)
    same_losses = True

    def initial_theta(self, data):
        return np.zeros(1)

    def estimating(self, theta, data, weights=None, hessian=True):
        r = data.y - theta[0]
        w = np.full(data.n, 1.0 / data.n) if weights is None else weights
        return LossTerms(LOG_SQRT_2PI + 0.5 * r * r, -r[:, None],
                         np.array([[np.sum(w)]]) if hessian else None)

    def assessment(self, theta, data):
        return self.estimating(theta, data, hessian=False)


class ConstantAssessment(GaussianLinear):
    """Gaussian estimating loss; assessment loss constant in theta."""

    def __init__(self, k):
        super().__init__(k)
        self.same_losses = False

    def assessment(self, theta, data):
        return LossTerms(np.full(data.n, 0.7), np.zeros((data.n, self.p)))


class GaussianSigma(LossPair):
    """Gaussian linear model parameterized by (beta, sigma) instead of log sigma."""

    same_losses = True

    def __init__(self, k):
        self.k = k
        self.labels = tuple([f"beta{j}" for j in range(k + 1)] + ["sigma"])

    def initial_theta(self, data):
        base = GaussianLinear(self.k).initial_theta(data)
        return np.append(base[:-1], np.exp(base[-1]))

    def estimating(self, theta, data, weights=None, hessian=True):
        Z = np.column_stack([np.ones(data.n), data.X])
        sigma = theta[-1]
        r = data.y - Z @ theta[:-1]
        values = LOG_SQRT_2PI + np.log(sigma) + 0.5 * r**2 / sigma**2
        grads = np.column_stack([-(r / sigma**2)[:, None] * Z, 1 / sigma - r**2 / sigma**3])
        H = None
        if hessian:
            w = np.full(data.n, 1.0 / data.n) if weights is None else weights
            k = Z.shape[1]
            H = np.empty((k + 1, k + 1))
            H[:k, :k] = (Z * w[:, None]).T @ Z / sigma**2
            H[:k, k] = H[k, :k] = 2 * (w * r) @ Z / sigma**3
            H[k, k] = w @ (-1 / sigma**2 + 3 * r**2 / sigma**4)
        return LossTerms(values, grads, H)

    def assessment(self, theta, data):
        return self.estimating(theta, data, hessian=False)


def gaussian_data(rng, n, k=1, beta=None, sigma=1.0):
    X = rng.normal(size=(n, k))
    beta = np.linspace(0.5, -0.5, k + 1) if beta is None else np.asarray(beta)
    y = beta[0] + X @ beta[1:] + sigma * rng.normal(size=n)
    return Dataset(y, X)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
