"""Tests for Gaussian distances, structured inverses, conditionals and samplers."""

import math

import numpy as np
import pytest

from masked_regression.errors import InvalidInputError, SingularityError
from masked_regression.gaussian_math import (
    MultivariateGaussian,
    RngStream,
    UnivariateGaussian,
    conditional_given_linear,
    kl_gaussians,
    pinsker_tv_bound,
    psd_sqrt,
    sample_gaussian,
    sample_gaussian_batch,
    sample_sum_conditioned,
    sample_sum_conditioned_batch,
    sherman_morrison_inverse,
    tv_bound_univariate,
    tv_exact_from_shift,
    tv_exact_univariate_equal_var,
)


class TestTotalVariation:
    def test_bound_unit_shift(self):
        tv = tv_bound_univariate(UnivariateGaussian(0, 1), UnivariateGaussian(1, 1))
        assert tv == pytest.approx(0.70711, abs=1e-5)
        assert tv == pytest.approx(1 / math.sqrt(2), abs=1e-9)

    def test_bound_identical_is_zero(self):
        assert tv_bound_univariate(UnivariateGaussian(3, 4), UnivariateGaussian(3, 4)) == 0

    def test_bound_dominates_exact(self):
        g1, g2 = UnivariateGaussian(0, 1), UnivariateGaussian(0.5, 1)
        exact = tv_exact_univariate_equal_var(g1, g2)
        assert exact == pytest.approx(0.19741, abs=1e-5)
        assert tv_bound_univariate(g1, g2) >= exact

    def test_exact_unit_shift(self):
        tv = tv_exact_univariate_equal_var(UnivariateGaussian(0, 1), UnivariateGaussian(1, 1))
        assert tv == pytest.approx(0.38292, abs=1e-5)

    def test_exact_scales_with_std(self):
        tv = tv_exact_univariate_equal_var(UnivariateGaussian(0, 4), UnivariateGaussian(2, 4))
        assert tv == pytest.approx(0.38292, abs=1e-5)

    def test_exact_tiny_shift_keeps_precision(self):
        tv = tv_exact_univariate_equal_var(UnivariateGaussian(0, 1), UnivariateGaussian(1e-12, 1))
        assert tv == pytest.approx(1e-12 / math.sqrt(2 * math.pi), rel=1e-6)

    def test_vectorized_matches_scalar(self):
        deltas = np.array([0.0, 0.5, -1.0])
        out = tv_exact_from_shift(deltas, 1.0)
        assert out[0] == 0.0
        assert out[2] == pytest.approx(0.38292, abs=1e-5)

    def test_unequal_variances_rejected(self):
        with pytest.raises(InvalidInputError):
            tv_bound_univariate(UnivariateGaussian(0, 1), UnivariateGaussian(0, 2))
        with pytest.raises(InvalidInputError):
            tv_exact_univariate_equal_var(UnivariateGaussian(0, 1), UnivariateGaussian(0, 2))

    def test_zero_variance_rejected(self):
        with pytest.raises(InvalidInputError):
            tv_bound_univariate(UnivariateGaussian(0, 0), UnivariateGaussian(1, 0))

    def test_negative_variance_rejected(self):
        with pytest.raises(InvalidInputError):
            UnivariateGaussian(0, -1)


class TestKL:
    def test_identical_is_zero(self):
        g = MultivariateGaussian(np.zeros(3), np.eye(3))
        assert kl_gaussians(g, g) == pytest.approx(0.0, abs=1e-12)

    def test_mean_shift(self):
        p = MultivariateGaussian(np.zeros(2), np.eye(2))
        q = MultivariateGaussian(np.array([1.0, 2.0]), np.eye(2))
        assert kl_gaussians(p, q) == pytest.approx(2.5, abs=1e-12)

    def test_covariance_term(self):
        p = MultivariateGaussian(np.zeros(1), np.array([[1.0]]))
        q = MultivariateGaussian(np.zeros(1), np.array([[2.0]]))
        expected = 0.5 * (math.log(2.0) - 1.0 + 0.5)
        assert kl_gaussians(p, q) == pytest.approx(expected, abs=1e-12)

    def test_singular_q_rejected(self):
        p = MultivariateGaussian(np.zeros(2), np.eye(2))
        q = MultivariateGaussian(np.zeros(2), np.diag([1.0, 0.0]))
        with pytest.raises(SingularityError):
            kl_gaussians(p, q)

    def test_singular_p_is_infinite(self):
        p = MultivariateGaussian(np.zeros(2), np.diag([1.0, 0.0]))
        q = MultivariateGaussian(np.zeros(2), np.eye(2))
        assert kl_gaussians(p, q) == math.inf

    def test_pinsker(self):
        assert pinsker_tv_bound(0.5) == pytest.approx(0.5)
        with pytest.raises(InvalidInputError):
            pinsker_tv_bound(-0.1)


class TestShermanMorrison:
    def test_matches_dense_inverse(self):
        u = np.array([1.0, 2.0, -1.0])
        v = np.array([0.5, 0.0, 1.0])
        expected = np.linalg.inv(np.eye(3) + np.outer(u, v))
        assert np.allclose(sherman_morrison_inverse(u, v), expected, atol=1e-12)

    def test_zero_pivot_rejected(self):
        with pytest.raises(SingularityError):
            sherman_morrison_inverse([1.0, 0.0], [-1.0, 0.0])

    def test_length_mismatch(self):
        with pytest.raises(InvalidInputError):
            sherman_morrison_inverse([1.0], [1.0, 2.0])


class TestConditionalGivenLinear:
    def test_noiseless_sum(self):
        g = conditional_given_linear(3, np.ones(3), 0.0, 3.0)
        assert np.allclose(g.mean, np.ones(3))
        assert np.allclose(g.covariance, np.eye(3) - np.ones((3, 3)) / 3)

    def test_noisy(self):
        u = np.array([1.0, 0.0])
        g = conditional_given_linear(2, u, 1.0, 2.0)
        assert np.allclose(g.mean, [1.0, 0.0])
        assert np.allclose(g.covariance, np.diag([0.5, 1.0]))

    def test_no_signal_no_noise_rejected(self):
        with pytest.raises(InvalidInputError):
            conditional_given_linear(2, np.zeros(2), 0.0, 1.0)

    def test_length_mismatch(self):
        with pytest.raises(InvalidInputError):
            conditional_given_linear(3, np.ones(2), 1.0, 0.0)


class TestMultivariateGaussian:
    def test_sqrt_factor(self):
        cov = np.array([[2.0, 0.5], [0.5, 1.0]])
        g = MultivariateGaussian(np.zeros(2), cov)
        assert np.allclose(g.sqrt_factor @ g.sqrt_factor, cov, atol=1e-12)

    def test_rank_deficient_allowed(self):
        cov = np.eye(3) - np.ones((3, 3)) / 3
        g = MultivariateGaussian(np.zeros(3), cov)
        assert np.allclose(g.sqrt_factor @ g.sqrt_factor, cov, atol=1e-10)

    def test_asymmetric_rejected(self):
        with pytest.raises(InvalidInputError):
            MultivariateGaussian(np.zeros(2), np.array([[1.0, 0.1], [0.0, 1.0]]))

    def test_not_psd_rejected(self):
        with pytest.raises(InvalidInputError):
            psd_sqrt(np.diag([1.0, -0.5]))

    def test_shape_mismatch(self):
        with pytest.raises(InvalidInputError):
            MultivariateGaussian(np.zeros(3), np.eye(2))


class TestRngStream:
    def test_same_seed_same_draws(self):
        assert np.array_equal(RngStream(7).standard_normal(5), RngStream(7).standard_normal(5))

    def test_child_ignores_parent_consumption(self):
        parent = RngStream(7)
        fresh = parent.child(3).standard_normal(4)
        parent.standard_normal(100)
        assert np.array_equal(parent.child(3).standard_normal(4), fresh)

    def test_children_differ(self):
        parent = RngStream(7)
        assert not np.array_equal(parent.child(0).standard_normal(4), parent.child(1).standard_normal(4))


class TestSamplers:
    def test_sum_conditioned_hits_sum(self, rng):
        x = sample_sum_conditioned(10, 2.5, rng)
        assert x.sum() == pytest.approx(2.5, abs=1e-9)

    def test_sum_conditioned_batch(self, rng):
        t = np.array([0.0, 1.0, -4.0])
        X = sample_sum_conditioned_batch(5, t, rng)
        assert np.allclose(X.sum(axis=1), t, atol=1e-9)

    def test_sum_conditioned_marginal(self, rng):
        X = sample_sum_conditioned_batch(4, np.full(40_000, 2.0), rng)
        assert X[:, 0].mean() == pytest.approx(0.5, abs=0.02)
        assert X[:, 0].var() == pytest.approx(0.75, abs=0.03)

    def test_gaussian_batch_moments(self, rng):
        cov = np.array([[1.0, 0.6], [0.6, 2.0]])
        g = MultivariateGaussian(np.array([1.0, -1.0]), cov)
        X = sample_gaussian_batch(g, 50_000, rng)
        assert np.allclose(X.mean(axis=0), g.mean, atol=0.03)
        assert np.allclose(np.cov(X.T), cov, atol=0.05)

    def test_single_draw_shape(self, rng):
        g = MultivariateGaussian(np.zeros(3), np.eye(3))
        assert sample_gaussian(g, rng).shape == (3,)
