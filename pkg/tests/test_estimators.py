"""Tests for trimmed statistics, A1/A2/A3/OLS and the unified estimator."""

import math

import numpy as np
import pytest

from masked_regression.adversaries import oblivious_erasure, sign_flip_replacement
from masked_regression.errors import InvalidInputError, RegimeError, SingularityError
from masked_regression.estimators import (
    MetaConfig,
    a2_trim_fraction,
    chi2_trim_consistency,
    estimation_error,
    estimator_a1,
    estimator_a2,
    estimator_a3,
    estimator_ols_complete,
    label_scale_estimate,
    row_trim_fraction,
    run_estimator,
    sigma_hat_residual,
    trimmed_mean,
    unified_estimator,
)
from masked_regression.gaussian_math import RngStream
from masked_regression.model_core import Dataset, RegressionInstance, regressor_for_norm, sample_clean


def _data(d, norm, sigma, n, seed=0):
    inst = RegressionInstance(d, regressor_for_norm(d, norm), sigma)
    return inst, sample_clean(inst, n, RngStream(seed))


class TestTrimmedMean:
    def test_drops_both_tails(self):
        assert trimmed_mean([1, 2, 3, 4, 100], 0.2) == 3.0

    def test_no_trim(self):
        assert trimmed_mean([1.0, 2.0, 6.0], 0.0) == 3.0

    def test_empty(self):
        with pytest.raises(InvalidInputError):
            trimmed_mean([], 0.1)

    def test_overtrim(self):
        with pytest.raises(InvalidInputError):
            trimmed_mean([1.0, 2.0], 0.45)

    def test_fraction_out_of_range(self):
        with pytest.raises(InvalidInputError):
            trimmed_mean([1.0, 2.0, 3.0], 0.5)

    def test_trim_fraction(self):
        assert a2_trim_fraction(0.01) == pytest.approx(0.03)
        assert a2_trim_fraction(0.8) == 0.45

    def test_row_trim_covers_every_column(self):
        assert row_trim_fraction(0.001, 99) == pytest.approx(0.3)
        assert row_trim_fraction(0.01, 99) == 0.45

    def test_outliers_removed(self, rng):
        values = rng.standard_normal(10_000)
        values[:250], values[250:500] = 1e6, -1e6
        assert abs(trimmed_mean(values, 0.1)) <= 0.1

    def test_order_of_input_irrelevant(self, rng):
        values = rng.standard_normal(1001) ** 3
        shuffled = values[rng.child(1).permutation(values.size)]
        assert trimmed_mean(shuffled, 0.05) == trimmed_mean(values, 0.05)

    def test_consistency_factor(self, rng):
        assert chi2_trim_consistency(0.0) == 1.0
        z2 = rng.standard_normal(400_000) ** 2
        assert trimmed_mean(z2, 0.1) == pytest.approx(chi2_trim_consistency(0.1), rel=0.01)


class TestA2:
    def test_clean_recovery(self):
        inst, data = _data(5, 2.0, 1.0, 20_000)
        out = estimator_a2(data, 0.0)
        assert out.chosen_branch == "A2"
        assert estimation_error(out.beta_hat, inst.beta) < 0.1

    def test_uses_samples_with_label_and_coordinate(self):
        inst, data = _data(3, 1.0, 0.5, 5000)
        erased = oblivious_erasure(data, 0.1, RngStream(1))
        # heavy trimming of the skewed y x_j biases each coordinate; stay within the A2 rate
        rate = 0.1 * math.sqrt(3) * math.sqrt(1.0 + 0.25)
        assert estimation_error(estimator_a2(erased, 0.1).beta_hat, inst.beta) < 3 * rate

    def test_insufficient_support(self):
        X = np.full((20, 2), np.nan)
        X[:, 0] = 1.0
        with pytest.raises(InvalidInputError):
            estimator_a2(Dataset(X, np.ones(20)), 0.0)


class TestA1:
    def test_clean_recovery(self):
        inst, data = _data(5, 3.0, 1.0, 5000)
        out = estimator_a1(data, 0.001)
        assert out.chosen_branch == "A1"
        assert estimation_error(out.beta_hat, inst.beta) < 0.1
        assert out.diagnostics["active_set_size"] < data.n

    def test_outside_regime(self):
        _, data = _data(10, 1.0, 1.0, 100)
        with pytest.raises(RegimeError):
            estimator_a1(data, 0.05)

    def test_too_few_complete_rows(self):
        X = np.full((10, 3), np.nan)
        X[:2] = 1.0
        with pytest.raises(SingularityError):
            estimator_a1(Dataset(X, np.ones(10)), 0.01)


class TestA3AndOLS:
    def test_a3_error_is_norm(self):
        beta = regressor_for_norm(20, 100.0)
        assert estimation_error(estimator_a3(20).beta_hat, beta) == float(np.linalg.norm(beta))

    def test_ols_noiseless_exact(self):
        inst, data = _data(4, 2.0, 0.0, 50)
        assert np.allclose(estimator_ols_complete(data).beta_hat, inst.beta, atol=1e-8)

    def test_ols_drops_erased_rows(self):
        inst, data = _data(3, 1.0, 0.0, 40)
        data.X[:5, 0] = np.nan
        out = estimator_ols_complete(data)
        assert out.chosen_branch == "OLS"
        assert out.diagnostics["complete_rows"] == 35
        assert np.allclose(out.beta_hat, inst.beta, atol=1e-8)


class TestUpperBounds:
    """Median error over five trials against the rate times 10."""

    def test_a2_under_sign_flip(self):
        errors = []
        for t in range(5):
            inst, data = _data(50, 1.0, 1.0, 100_000, seed=10 + t)
            out = estimator_a2(sign_flip_replacement(data, 0.02), 0.02)
            errors.append(estimation_error(out.beta_hat, inst.beta))
        assert np.median(errors) <= 10 * 0.02 * math.sqrt(50) * math.sqrt(2)

    def test_a1_under_erasure(self):
        errors = []
        for t in range(5):
            inst, data = _data(20, 100.0, 1.0, 100_000, seed=20 + t)
            out = estimator_a1(oblivious_erasure(data, 0.002, RngStream(30 + t)), 0.002)
            errors.append(estimation_error(out.beta_hat, inst.beta))
        assert np.median(errors) <= 10 * 0.002 * 20 * 1.0


class TestScaleEstimates:
    def test_sigma_hat(self):
        inst, data = _data(5, 1.0, 2.0, 50_000)
        assert sigma_hat_residual(data, inst.beta, 0.01) == pytest.approx(2.0, rel=0.03)

    def test_label_scale(self):
        _, data = _data(5, 3.0, 4.0, 50_000)
        assert label_scale_estimate(data, 0.01) == pytest.approx(5.0, rel=0.03)

    def test_sigma_hat_needs_complete_rows(self):
        X = np.array([[np.nan, 1.0], [1.0, np.nan]])
        with pytest.raises(InvalidInputError):
            sigma_hat_residual(Dataset(X, np.ones(2)), np.zeros(2), 0.0)


class TestUnified:
    def test_zero_regressor_picks_a3(self):
        _, data = _data(20, 0.0, 1.0, 40_000)
        out = unified_estimator(data, 0.01)
        assert out.chosen_branch == "A3"
        assert np.array_equal(out.beta_hat, np.zeros(20))

    def test_large_regressor_picks_a1(self):
        inst, data = _data(10, 100.0, 1.0, 20_000)
        out = unified_estimator(data, 0.001)
        assert out.chosen_branch == "A1"
        assert out.sigma_hat == pytest.approx(1.0, rel=0.1)

    def test_moderate_regressor_picks_a2(self):
        _, data = _data(10, 1.0, 1.0, 20_000)
        out = unified_estimator(data, 0.001)
        assert out.chosen_branch == "A2"
        assert out.diagnostics["beta2_norm"] > 4 * out.diagnostics["e2"]

    def test_a1_disabled_when_corruption_too_large(self):
        _, data = _data(10, 1.0, 1.0, 2000)
        out = unified_estimator(data, 0.1)
        assert out.diagnostics["a1_enabled"] == 0.0
        assert "e1" not in out.diagnostics
        assert out.chosen_branch in ("A2", "A3")
        # measured against the A2 estimate instead
        assert out.sigma_hat == pytest.approx(1.0, rel=0.3)

    def test_no_complete_rows_without_a1(self):
        _, data = _data(10, 1.0, 1.0, 4000)
        data.X[np.arange(4000), np.arange(4000) % 10] = np.nan
        out = unified_estimator(data, 0.1)
        assert out.sigma_hat is None

    def test_large_regressor_picks_a1_under_sign_flip(self):
        inst, data = _data(100, 100.0, 1.0, 50_000, seed=4)
        out = unified_estimator(sign_flip_replacement(data, 0.001), 0.001)
        assert out.chosen_branch == "A1"
        assert out.sigma_hat < 1.5
        assert estimation_error(out.beta_hat, inst.beta) < 0.5

    def test_large_regressor_picks_a1_under_erasure(self):
        inst, data = _data(100, 100.0, 1.0, 50_000, seed=4)
        out = unified_estimator(oblivious_erasure(data, 0.001, RngStream(5)), 0.001)
        assert out.chosen_branch == "A1"
        assert out.sigma_hat == pytest.approx(1.0, rel=0.1)

    def test_sampling_noise_alone_picks_a3(self):
        _, data = _data(100, 0.001, 1.0, 50_000, seed=6)
        out = unified_estimator(data, 0.001)
        assert out.diagnostics["sampling_floor"] == pytest.approx(math.sqrt(100 / 50_000), rel=0.05)
        assert out.chosen_branch == "A3"

    def test_precomputed_branches_reused(self):
        _, data = _data(10, 1.0, 1.0, 5000)
        a1, a2 = estimator_a1(data, 0.001), estimator_a2(data, 0.001)
        direct = unified_estimator(data, 0.001)
        reused = unified_estimator(data, 0.001, a1=a1, a2=a2)
        assert reused.chosen_branch == direct.chosen_branch
        assert np.array_equal(reused.beta_hat, direct.beta_hat)

    def test_meta_config_ordering(self):
        with pytest.raises(InvalidInputError):
            MetaConfig(C=4.0, C_prime=3.0)


class TestRunEstimator:
    def test_dispatch(self):
        _, data = _data(3, 1.0, 1.0, 200)
        assert run_estimator("a3", data, 0.0).chosen_branch == "A3"
        assert run_estimator("ols", data, 0.0).chosen_branch == "OLS"

    def test_unknown(self):
        _, data = _data(3, 1.0, 1.0, 20)
        with pytest.raises(InvalidInputError):
            run_estimator("a4", data, 0.0)

    def test_error_length_mismatch(self):
        with pytest.raises(InvalidInputError):
            estimation_error(np.zeros(2), np.zeros(3))

    def test_output_json(self):
        out = estimator_a3(2).to_json()
        assert out == {"beta_hat": [0.0, 0.0], "chosen_branch": "A3", "sigma_hat": None, "diagnostics": {}}
