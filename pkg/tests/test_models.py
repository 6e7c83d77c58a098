import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from sandwichpost import (
    DimensionMismatch,
    EmptyInput,
    FiniteExpFamily,
    LinearRegression,
    MomentOnBoundary,
    RegressionObs,
    SingularDesign,
    expfam_pseudo_true,
    kl_oracle_pseudo_true,
    rng_stream,
)


def obs(y, x1):
    return RegressionObs(y=y, x=np.array([1.0, x1]))


class TestRegressionObs:
    def test_leading_one_enforced(self):
        with pytest.raises(ValueError):
            RegressionObs(y=1.0, x=np.array([0.5, 2.0]))

    def test_vector_shape_enforced(self):
        with pytest.raises(DimensionMismatch):
            RegressionObs(y=1.0, x=np.ones((2, 2)))


class TestRegressionScore:
    def test_zero_parameter(self):
        model = LinearRegression(dim=2)
        assert_array_equal(model.score([0.0, 0.0], obs(1.0, 0.0)), [1.0, 0.0])

    def test_zero_residual(self):
        model = LinearRegression(dim=2)
        assert_array_equal(model.score([1.0, 1.0], obs(2.0, 1.0)), [0.0, 0.0])

    def test_hand_value(self):
        model = LinearRegression(dim=2)
        assert_allclose(model.score([1.0, 2.0], obs(0.0, 3.0)), [-7.0, -21.0])

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            LinearRegression(dim=3).score([0.0, 0.0, 0.0], obs(1.0, 1.0))


class TestRegressionHessian:
    def test_unit_vector(self):
        model = LinearRegression(dim=2)
        assert_array_equal(
            model.hessian([0.0, 0.0], obs(5.0, 0.0)), [[-1.0, 0.0], [0.0, 0.0]]
        )

    def test_hand_outer_product(self):
        model = LinearRegression(dim=2)
        assert_array_equal(
            model.hessian([0.0, 0.0], obs(5.0, 1.0)), [[-1.0, -1.0], [-1.0, -1.0]]
        )

    def test_constant_in_parameter(self):
        model = LinearRegression(dim=2)
        point = obs(3.0, 2.0)
        assert_array_equal(
            model.hessian([0.0, 0.0], point), model.hessian([9.0, 9.0], point)
        )


class TestRegressionFit:
    def test_perfect_fit_line(self):
        model = LinearRegression(dim=2)
        beta = model.fit_mle([obs(0.0, 0.0), obs(1.0, 1.0)])
        assert_allclose(beta, [0.0, 1.0], atol=1e-12)

    def test_rank_deficient_design(self):
        model = LinearRegression(dim=2)
        with pytest.raises(SingularDesign):
            model.fit_mle([obs(0.0, 0.0), obs(2.0, 0.0)])

    def test_too_few_observations(self):
        model = LinearRegression(dim=2)
        with pytest.raises(SingularDesign):
            model.fit_mle([obs(0.0, 0.0)])

    def test_hand_normal_equations(self):
        model = LinearRegression(dim=2)
        beta = model.fit_mle([obs(1.0, 0.0), obs(1.0, 1.0), obs(4.0, 2.0)])
        assert_allclose(beta, [0.5, 1.5], atol=1e-12)

    def test_stationarity_on_random_data(self):
        rng = rng_stream(21)
        model = LinearRegression(dim=2)
        for _ in range(25):
            n = int(rng.integers(5, 60))
            data = [
                obs(float(rng.standard_normal()), float(rng.standard_normal()))
                for _ in range(n)
            ]
            beta = model.fit_mle(data)
            assert np.linalg.norm(model.score_sum(beta, data)) <= 1e-8 * n

    def test_vectorized_sums_match_generic(self):
        from sandwichpost import WorkingModel

        rng = rng_stream(22)
        model = LinearRegression(dim=2)
        data = [
            obs(float(rng.standard_normal()), float(rng.standard_normal()))
            for _ in range(17)
        ]
        theta = rng.standard_normal(2)
        generic_outer = WorkingModel.score_outer_sum(model, theta, data)
        generic_hess = WorkingModel.hessian_sum(model, theta, data)
        generic_score = WorkingModel.score_sum(model, theta, data)
        assert_allclose(model.score_outer_sum(theta, data), generic_outer, rtol=1e-12)
        assert_allclose(model.hessian_sum(theta, data), generic_hess, rtol=1e-12)
        assert_allclose(model.score_sum(theta, data), generic_score, rtol=1e-12)


def finite_difference_gradient(f, theta, h=1e-5):
    theta = np.asarray(theta, dtype=float)
    grad = np.empty_like(theta)
    for j in range(theta.size):
        step = np.zeros_like(theta)
        step[j] = h
        grad[j] = (f(theta + step) - f(theta - step)) / (2.0 * h)
    return grad


class TestDerivativeChecks:
    def test_regression_score_matches_finite_differences(self):
        rng = rng_stream(23)
        model = LinearRegression(dim=2)
        for _ in range(100):
            theta = rng.standard_normal(2)
            point = obs(float(rng.standard_normal()), float(rng.standard_normal()))
            fd = finite_difference_gradient(lambda t: model.log_likelihood(t, point), theta)
            assert_allclose(model.score(theta, point), fd, atol=1e-6)

    def test_regression_hessian_matches_finite_differences(self):
        rng = rng_stream(24)
        model = LinearRegression(dim=2)
        h = 1e-5
        for _ in range(100):
            theta = rng.standard_normal(2)
            point = obs(float(rng.standard_normal()), float(rng.standard_normal()))
            hess = model.hessian(theta, point)
            for j in range(2):
                step = np.zeros(2)
                step[j] = h
                fd_col = (model.score(theta + step, point) - model.score(theta - step, point)) / (2 * h)
                assert_allclose(hess[:, j], fd_col, atol=1e-6)

    def test_expfam_score_matches_finite_differences(self):
        rng = rng_stream(25)
        fam = FiniteExpFamily(
            support=[0.0, 1.0, 2.0, 3.5],
            stats=[lambda x: x, lambda x: x * x],
            weights=[1.0, 0.5, 2.0, 0.25],
        )
        for _ in range(100):
            theta = 0.5 * rng.standard_normal(2)
            point = fam.support[int(rng.integers(len(fam.support)))]
            fd = finite_difference_gradient(lambda t: fam.log_likelihood(t, point), theta)
            assert_allclose(fam.score(theta, point), fd, atol=1e-6)
            hess = fam.hessian(theta, point)
            for j in range(2):
                step = np.zeros(2)
                step[j] = 1e-5
                fd_col = (fam.score(theta + step, point) - fam.score(theta - step, point)) / 2e-5
                assert_allclose(hess[:, j], fd_col, atol=1e-6)


def bernoulli_family():
    return FiniteExpFamily(support=[0.0, 1.0], stats=[lambda x: x])


class TestPseudoTrue:
    def test_bernoulli_logit(self):
        theta = expfam_pseudo_true(bernoulli_family(), [0.7, 0.3])
        assert theta[0] == pytest.approx(np.log(0.3 / 0.7), abs=1e-9)
        # cross-check against the brute-force KL oracle on a fine grid
        grid = np.linspace(-2.0, 2.0, 4001)
        oracle = kl_oracle_pseudo_true(bernoulli_family(), [0.7, 0.3], grid)
        assert abs(oracle - theta[0]) <= grid[1] - grid[0]

    def test_correctly_specified_returns_zero(self):
        fam = FiniteExpFamily(
            support=[0.0, 1.0, 2.0], stats=[lambda x: x], weights=[1.0, 2.0, 1.5]
        )
        theta = expfam_pseudo_true(fam, fam.probs(np.zeros(1)))
        assert_allclose(theta, [0.0], atol=1e-8)

    def test_boundary_moment_raises(self):
        with pytest.raises(MomentOnBoundary):
            expfam_pseudo_true(bernoulli_family(), [0.0, 1.0])

    def test_invalid_p0_rejected(self):
        with pytest.raises(ValueError):
            expfam_pseudo_true(bernoulli_family(), [0.5, 0.6])

    def test_moment_matching_random_instances(self):
        rng = rng_stream(26)
        for _ in range(25):
            k = int(rng.integers(3, 8))
            support = np.sort(rng.standard_normal(k) * 2.0)
            fam = FiniteExpFamily(
                support=list(support),
                stats=[lambda x: x, lambda x: x * x],
                weights=rng.random(k) + 0.2,
            )
            p0 = rng.random(k) + 0.05
            p0 /= p0.sum()
            theta = expfam_pseudo_true(fam, p0)
            assert np.max(np.abs(fam.mean_stats(theta) - fam.stat_matrix.T @ p0)) <= 1e-9

    def test_oracle_agreement_on_random_instances(self):
        rng = rng_stream(27)
        for _ in range(10):
            k = int(rng.integers(3, 7))
            support = np.sort(rng.standard_normal(k) * 1.5)
            fam = FiniteExpFamily(support=list(support), stats=[lambda x: x])
            p0 = rng.random(k) + 0.1
            p0 /= p0.sum()
            theta = expfam_pseudo_true(fam, p0)[0]
            mesh = 1e-3
            grid = theta + mesh * np.arange(-300, 301)
            oracle = kl_oracle_pseudo_true(fam, p0, grid)
            assert abs(oracle - theta) <= mesh


class TestKlOracle:
    def test_singleton_grid(self):
        assert kl_oracle_pseudo_true(bernoulli_family(), [0.4, 0.6], [0.0]) == 0.0

    def test_truth_on_grid_wins(self):
        fam = FiniteExpFamily(
            support=[0.0, 1.0, 2.0], stats=[lambda x: x], weights=[1.0, 1.0, 1.0]
        )
        theta0 = 0.7
        p0 = fam.probs(np.array([theta0]))
        grid = np.linspace(-2.0, 2.0, 41)  # contains 0.7 exactly
        assert kl_oracle_pseudo_true(fam, p0, grid) == pytest.approx(theta0)

    def test_empty_grid(self):
        with pytest.raises(EmptyInput):
            kl_oracle_pseudo_true(bernoulli_family(), [0.5, 0.5], [])

    def test_first_wins_on_ties(self):
        # symmetric p0 makes +/-t equivalent for the Bernoulli family
        fam = bernoulli_family()
        p0 = [0.5, 0.5]
        assert kl_oracle_pseudo_true(fam, p0, [0.3, -0.3]) == 0.3


class TestNormalMeanSpecialCase:
    """A location family with N(0,1) base weights on a fine grid behaves like
    the normal-mean working model: its moment-matched parameter reproduces
    the population mean of any distribution on the grid."""

    @staticmethod
    def discretized_normal_family(grid):
        return FiniteExpFamily(
            support=list(grid),
            stats=[lambda x: x],
            weights=np.exp(-0.5 * grid * grid),
        )

    def test_pseudo_true_equals_population_mean(self):
        grid = np.linspace(-8.0, 8.0, 1601)
        fam = self.discretized_normal_family(grid)
        # a skewed, clearly non-normal population on the same grid
        raw = np.exp(-np.abs(grid - 0.4)) * (1.0 + (grid > 0.4))
        p0 = raw / raw.sum()
        population_mean = float(grid @ p0)

        theta = expfam_pseudo_true(fam, p0)
        # fitted-model mean matches the population mean exactly (to solver tol)
        assert fam.mean_stats(theta)[0] == pytest.approx(population_mean, abs=1e-9)
        # for this family the natural parameter is the mean, up to grid truncation
        assert theta[0] == pytest.approx(population_mean, abs=1e-6)

        oracle = kl_oracle_pseudo_true(fam, p0, population_mean + 0.001 * np.arange(-200, 201))
        assert abs(oracle - theta[0]) <= 0.001

    def test_extreme_points_give_boundary(self):
        grid = np.linspace(-2.0, 2.0, 11)
        fam = self.discretized_normal_family(grid)
        p0 = np.zeros(11)
        p0[-1] = 1.0
        with pytest.raises(MomentOnBoundary):
            expfam_pseudo_true(fam, p0)


class TestExpFamilyAsWorkingModel:
    def test_fit_mle_matches_sample_moments(self):
        fam = FiniteExpFamily(support=[0.0, 1.0, 2.0], stats=[lambda x: x])
        data = [0.0, 1.0, 1.0, 2.0, 1.0, 0.0]
        theta = fam.fit_mle(data)
        sample_mean = np.mean(data)
        assert fam.mean_stats(theta)[0] == pytest.approx(sample_mean, abs=1e-9)
        assert np.linalg.norm(fam.score_sum(theta, data)) <= 1e-8 * len(data)

    def test_observation_outside_support_rejected(self):
        fam = FiniteExpFamily(support=[0.0, 1.0], stats=[lambda x: x])
        with pytest.raises(ValueError):
            fam.score(np.zeros(1), 0.5)
