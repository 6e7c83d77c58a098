import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from sandwichpost import (
    LinearRegression,
    RegressionObs,
    WorkingModel,
    compute_A,
    compute_S,
    rng_stream,
    sandwich_cov,
    wald_interval,
)


def obs(y, x1):
    return RegressionObs(y=y, x=np.array([1.0, x1]))


def intercept_obs(y):
    return RegressionObs(y=y, x=np.array([1.0]))


def random_dataset(rng, n=30):
    return [
        obs(float(rng.standard_normal() * (1 + abs(x))), x)
        for x in rng.standard_normal(n)
    ]


class TestComputeA:
    def test_hand_sum(self):
        model = LinearRegression(dim=2)
        data = [obs(0.0, 0.0), obs(0.0, 1.0)]
        assert_allclose(compute_A(model, [0.0, 0.0], data), [[-2.0, -1.0], [-1.0, -1.0]])

    def test_single_observation_equals_hessian(self):
        model = LinearRegression(dim=2)
        point = obs(3.0, 2.0)
        assert_array_equal(
            compute_A(model, [1.0, 1.0], [point]), model.hessian([1.0, 1.0], point)
        )

    def test_duplication_doubles(self):
        model = LinearRegression(dim=2)
        data = random_dataset(rng_stream(31), n=7)
        once = compute_A(model, [0.5, -0.5], data)
        twice = compute_A(model, [0.5, -0.5], data + data)
        assert_allclose(twice, 2.0 * once, rtol=1e-12)


class TestComputeS:
    def test_zero_at_perfect_fit(self):
        model = LinearRegression(dim=2)
        data = [obs(0.0, 0.0), obs(1.0, 1.0)]
        assert_allclose(compute_S(model, model.fit_mle(data), data), np.zeros((2, 2)), atol=1e-28)

    def test_intercept_only_hand_value(self):
        model = LinearRegression(dim=1)
        data = [intercept_obs(0.0), intercept_obs(2.0)]
        assert_allclose(compute_S(model, [1.0], data), [[2.0]])

    def test_duplication_doubles(self):
        model = LinearRegression(dim=2)
        data = random_dataset(rng_stream(32), n=9)
        once = compute_S(model, [0.2, 0.4], data)
        twice = compute_S(model, [0.2, 0.4], data + data)
        assert_allclose(twice, 2.0 * once, rtol=1e-12)

    def test_positive_semidefinite_everywhere(self):
        rng = rng_stream(33)
        model = LinearRegression(dim=2)
        data = random_dataset(rng, n=12)
        for _ in range(50):
            theta = 3.0 * rng.standard_normal(2)
            S = compute_S(model, theta, data)
            z = rng.standard_normal(2)
            assert z @ S @ z >= -1e-12


class TestSandwichCov:
    def test_intercept_only_hand_computation(self):
        fit = sandwich_cov(LinearRegression(dim=1), [intercept_obs(0.0), intercept_obs(2.0)])
        assert_allclose(fit.theta_hat, [1.0])
        assert_allclose(fit.A, [[-2.0]])
        assert_allclose(fit.B_hat, [[1.0]])
        assert_allclose(fit.C_hat, [[0.5]])

    def test_perfect_fit_gives_zero_covariance(self):
        fit = sandwich_cov(LinearRegression(dim=2), [obs(0.0, 0.0), obs(1.0, 1.0)])
        assert_allclose(fit.C_hat, np.zeros((2, 2)), atol=1e-25)

    def test_identity_with_score_sum_of_squares(self):
        rng = rng_stream(34)
        model = LinearRegression(dim=2)
        for _ in range(30):
            data = random_dataset(rng, n=int(rng.integers(5, 40)))
            fit = sandwich_cov(model, data)
            S = compute_S(model, fit.theta_hat, data)
            Ainv = np.linalg.inv(fit.A)
            direct = Ainv @ S @ Ainv
            scale = np.max(np.abs(direct)) + 1e-300
            assert np.max(np.abs(fit.C_hat - direct)) <= 1e-10 * scale

    def test_matches_independent_hc0_formula(self):
        rng = rng_stream(35)
        model = LinearRegression(dim=2)
        for _ in range(100):
            data = random_dataset(rng, n=int(rng.integers(4, 50)))
            X = np.stack([o.x for o in data])
            y = np.array([o.y for o in data])
            # independently coded HC0: (X'X)^-1 X' diag(e^2) X (X'X)^-1
            beta = np.linalg.lstsq(X, y, rcond=None)[0]
            resid = y - X @ beta
            bread = np.linalg.inv(X.T @ X)
            meat = X.T @ (X * (resid**2)[:, None])
            hc0 = bread @ meat @ bread
            fit = sandwich_cov(model, data)
            scale = np.max(np.abs(hc0))
            assert np.max(np.abs(fit.C_hat - hc0)) <= 1e-10 * scale

    def test_homoscedastic_large_sample_limit(self):
        rng = rng_stream(36)
        n = 100_000
        sigma = 0.7
        x = rng.standard_normal(n)
        y = 1.0 + 2.0 * x + sigma * rng.standard_normal(n)
        data = [RegressionObs(y=yi, x=np.array([1.0, xi])) for yi, xi in zip(y, x)]
        fit = sandwich_cov(LinearRegression(dim=2), data)
        X = np.stack([o.x for o in data])
        classical = sigma**2 * np.linalg.inv(X.T @ X)
        assert np.max(np.abs(fit.C_hat - classical)) <= 0.05 * np.max(np.abs(classical))


class _RescaledModel(WorkingModel):
    """Same model with scores and Hessians multiplied by a constant, the
    effect of fixing the working error variance at 1/c instead of 1."""

    def __init__(self, base, c):
        self.base = base
        self.c = c
        self.dim = base.dim

    def score(self, theta, obs):
        return self.c * self.base.score(theta, obs)

    def hessian(self, theta, obs):
        return self.c * self.base.hessian(theta, obs)

    def fit_mle(self, data):
        return self.base.fit_mle(data)


class TestVarianceScaleInvariance:
    def test_sandwich_invariant_under_rescaling(self):
        rng = rng_stream(37)
        base = LinearRegression(dim=2)
        data = random_dataset(rng, n=25)
        reference = sandwich_cov(base, data)
        for c in (0.1, 3.0, 42.0):
            rescaled = sandwich_cov(_RescaledModel(base, c), data)
            assert_allclose(rescaled.C_hat, reference.C_hat, rtol=1e-10)
            assert_allclose(rescaled.theta_hat, reference.theta_hat)


class TestWaldInterval:
    def test_hand_value(self):
        fit = sandwich_cov(LinearRegression(dim=1), [intercept_obs(0.0), intercept_obs(2.0)])
        lower, upper = wald_interval(fit, 0, 0.95)
        assert lower == pytest.approx(1.0 - 1.95996 * 0.70711, abs=5e-4)
        assert upper == pytest.approx(1.0 + 1.95996 * 0.70711, abs=5e-4)

    def test_exactly_zero_variance_gives_point_interval(self):
        from sandwichpost import SandwichFit

        fit = SandwichFit(
            theta_hat=np.array([0.0, 1.0]),
            A=-np.eye(2),
            B_hat=np.zeros((2, 2)),
            C_hat=np.zeros((2, 2)),
            n=2,
        )
        assert wald_interval(fit, 1, 0.95) == (1.0, 1.0)

    def test_perfect_fit_interval_collapses(self):
        fit = sandwich_cov(LinearRegression(dim=2), [obs(0.0, 0.0), obs(1.0, 1.0)])
        lower, upper = wald_interval(fit, 1, 0.95)
        assert upper - lower <= 1e-12
        assert lower == pytest.approx(1.0, abs=1e-12)

    def test_half_width_at_level_one_half(self):
        fit = sandwich_cov(LinearRegression(dim=1), [intercept_obs(0.0), intercept_obs(2.0)])
        lower, upper = wald_interval(fit, 0, 0.5)
        assert (upper - lower) / 2.0 == pytest.approx(0.6745 * np.sqrt(0.5), abs=5e-4)

    def test_level_out_of_range(self):
        fit = sandwich_cov(LinearRegression(dim=1), [intercept_obs(0.0), intercept_obs(2.0)])
        with pytest.raises(ValueError):
            wald_interval(fit, 0, 1.0)
