import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import ndtr

from conftest import ConstantAssessment, gaussian_data
from uacv.estimation import (
    ConvergenceError,
    DataModelMismatch,
    Dataset,
    fit,
    per_observation_d,
    per_observation_v,
)
from uacv.models import GaussianLinear, SquaredError, Threshold, ThresholdParams


def toy():
    return Dataset([0.0, 2.0], np.zeros((2, 0)))


def test_dataset_validation():
    with pytest.raises(ValueError, match="at least two"):
        Dataset([1.0], np.zeros((1, 0)))
    with pytest.raises(ValueError, match="row 1"):
        Dataset([0, 5], np.zeros((2, 0)), ordinal_levels=3)
    with pytest.raises(ValueError, match="row 0"):
        Dataset([0.0, 1.0], np.array([[np.nan], [1.0]]))
    d = Dataset([0, 1, 3], np.arange(3.0), ordinal_levels=3)
    assert d.covariate_dimension == 1 and d.n == 3
    assert d[2].response == 3
    np.testing.assert_array_equal(d[2].covariates, [2.0])


def test_squared_error_toy():
    f = fit(SquaredError(), toy())
    assert f.theta_hat[0] == pytest.approx(1.0)
    np.testing.assert_allclose(f.hessian_phi, [[2.0]])
    np.testing.assert_allclose(f.per_obs_phi_gradients[:, 0], [2.0, -2.0])
    np.testing.assert_allclose(per_observation_d(f)[:, 0], [2.0, -2.0])
    assert f.phi_bar == pytest.approx(1.0)


def test_gaussian_closed_form_mle():
    data = Dataset([-1.0, 0.0, 1.0], np.zeros((3, 0)))
    f = fit(GaussianLinear(0), data, theta0=np.zeros(2))
    assert f.theta_hat[0] == pytest.approx(0.0, abs=1e-10)
    assert np.exp(2 * f.theta_hat[1]) == pytest.approx(2 / 3, rel=1e-10)


def test_ordered_probit_is_consistent():
    # repeated fits at n=500 around known parameters
    rng = np.random.default_rng(5)
    true = ThresholdParams.from_cutoffs([0.8], [-1.0, 0.2, 1.1])
    model = Threshold(1, 3)
    fits = []
    for _ in range(40):
        x = rng.normal(size=(500, 1))
        latent = x @ true.beta + rng.normal(size=500)
        y = np.searchsorted(true.cutoffs, latent, side="right")
        fits.append(fit(model, Dataset(y, x, 3)).theta_hat)
    fits = np.array(fits)
    se = fits.std(axis=0, ddof=1) / np.sqrt(len(fits))
    assert np.all(np.abs(fits.mean(axis=0) - true.to_theta()) < 4 * se + 0.01)


def test_d_matches_finite_differences(rng):
    data = gaussian_data(rng, 101, k=2)
    lp = GaussianLinear(2)
    f = fit(lp, data)
    d = per_observation_d(f)
    h = 1e-6
    fd = np.empty_like(d)
    for j in range(lp.p):
        e = np.zeros(lp.p)
        e[j] = h
        fd[:, j] = (lp.estimating(f.theta_hat + e, data).values
                    - lp.estimating(f.theta_hat - e, data).values) / (2 * h)
    np.testing.assert_allclose(d, fd / (data.n - 1), atol=1e-6)


def test_v_equals_scaled_d_for_identical_losses(rng):
    data = gaussian_data(rng, 50)
    lp = GaussianLinear(1)
    f = fit(lp, data)
    v = per_observation_v(lp, f, data)
    np.testing.assert_array_equal(v, f.per_obs_phi_gradients)
    np.testing.assert_allclose(v, (data.n - 1) * per_observation_d(f), rtol=1e-15, atol=0)


def test_v_zero_for_constant_assessment(rng):
    data = gaussian_data(rng, 30)
    lp = ConstantAssessment(1)
    f = fit(lp, data)
    np.testing.assert_array_equal(per_observation_v(lp, f, data), 0.0)


def test_crps_v_matches_finite_differences(rng):
    data = gaussian_data(rng, 40, k=1, sigma=0.7)
    lp = GaussianLinear(1, "crps")
    f = fit(lp, data)
    v = per_observation_v(lp, f, data)
    h = 1e-6
    for j in range(lp.p):
        e = np.zeros(lp.p)
        e[j] = h
        fd = (lp.assessment(f.theta_hat + e, data).values
              - lp.assessment(f.theta_hat - e, data).values) / (2 * h)
        np.testing.assert_allclose(v[:, j], fd, atol=1e-5)


@settings(max_examples=25, deadline=None)
@given(n=st.integers(5, 60), seed=st.integers(0, 2**32 - 1), k=st.integers(0, 3))
def test_stationarity_of_converged_fits(n, seed, k):
    rng = np.random.default_rng(seed)
    data = gaussian_data(rng, n, k=k)
    f = fit(GaussianLinear(k), data)
    tol = 1e-8
    assert np.max(np.abs(f.per_obs_phi_gradients.mean(axis=0))) < tol
    assert np.max(np.abs(per_observation_d(f).mean(axis=0))) < tol / (n - 1)
    np.testing.assert_allclose(f.hessian_phi, f.hessian_phi.T, rtol=1e-10, atol=1e-14)


def test_theta0_length_checked(rng):
    with pytest.raises(ValueError, match="length"):
        fit(GaussianLinear(1), gaussian_data(rng, 10), theta0=np.zeros(5))


def test_empty_category_is_diagnosed():
    # level 1 never observed between populated levels 0 and 2
    y = np.array([0] * 20 + [2] * 20)
    x = np.linspace(-1, 1, 40).reshape(-1, 1)
    with pytest.raises(ConvergenceError, match=r"levels \[1\]"):
        fit(Threshold(1, 2), Dataset(y, x, 2))


def test_undefined_loss_cites_row(rng):
    class Broken(GaussianLinear):
        def estimating(self, theta, data, weights=None, hessian=True):
            t = super().estimating(theta, data, weights, hessian)
            values = t.values.copy()
            values[3] = np.nan
            return t._replace(values=values)

    with pytest.raises(DataModelMismatch, match="row 3"):
        fit(Broken(1), gaussian_data(rng, 10))


def test_fit_result_probabilities_reparameterization_free(rng):
    # threshold fitted probabilities do not depend on the start
    y = rng.integers(0, 3, size=200)
    x = rng.normal(size=(200, 1))
    data = Dataset(y, x, 2)
    m = Threshold(1, 2)
    a = fit(m, data)
    b = fit(m, data, theta0=np.array([0.5, -2.0, 1.0]))
    np.testing.assert_allclose(m.probabilities(a.theta_hat, x), m.probabilities(b.theta_hat, x),
                               atol=1e-8)
