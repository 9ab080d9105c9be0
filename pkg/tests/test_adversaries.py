"""Tests for the coupling adversary and the stress adversaries."""

import json

import numpy as np
import pytest

from masked_regression.adversaries import (
    AdversaryConfig,
    BudgetState,
    assert_budget,
    budget_for,
    coupling_adversary,
    modified_counts,
    oblivious_erasure,
    sign_flip_replacement,
)
from masked_regression.couplings import BigEta, SmallBeta
from masked_regression.errors import BudgetExceededError, InvalidInputError
from masked_regression.gaussian_math import RngStream
from masked_regression.model_core import RegressionInstance, sample_clean


@pytest.fixture
def clean(rng):
    return sample_clean(RegressionInstance(5, np.ones(5), 1.0), 1000, rng)


class TestBudget:
    def test_floor(self):
        assert budget_for(0.45, 1000) == 450
        assert budget_for(0.1, 30) == 3
        assert budget_for(0.0, 100) == 0

    def test_initial_state(self):
        state = BudgetState.initial(3, 0.1, 100)
        assert list(state.per_coordinate_remaining) == [10, 10, 10]
        assert state.label_remaining == 10

    def test_assert_budget_catches_overspend(self, clean):
        bad = clean.copy()
        bad.X[:11, 0] = np.nan
        with pytest.raises(BudgetExceededError):
            assert_budget(clean, bad, 0.01)

    def test_config_validation(self):
        with pytest.raises(InvalidInputError):
            AdversaryConfig(eta=1.5)
        with pytest.raises(InvalidInputError):
            AdversaryConfig(eta=0.1, mode="swap")


class TestCouplingAdversary:
    def test_big_eta_indistinguishable(self):
        spec = BigEta(d=100, s=1.0)
        cfg = AdversaryConfig(eta=0.45)
        successes = 0
        for seed in range(10):
            paired = coupling_adversary(spec, 1000, cfg, RngStream(seed))
            assert paired.edits_per_coordinate.max() <= 450
            if paired.success:
                successes += 1
                assert paired.dataset0.identical_to(paired.dataset1)
        assert successes >= 9

    def test_replace_mode_leaves_no_erasures(self):
        paired = coupling_adversary(BigEta(d=50, s=1.0), 500, AdversaryConfig(eta=0.45, mode="replace"),
                                    RngStream(3))
        assert paired.success
        assert not paired.dataset0.has_missing
        assert paired.dataset0.identical_to(paired.dataset1)

    def test_zero_budget_cannot_hide(self):
        paired = coupling_adversary(BigEta(d=10, s=1.0), 100, AdversaryConfig(eta=0.0), RngStream(0))
        assert not paired.success
        assert paired.edits_per_coordinate.sum() == 0
        assert paired.budget_final.label_remaining == 0

    def test_identical_hypotheses_need_no_edits(self):
        paired = coupling_adversary(SmallBeta(d=8, b=0.0, sigma=1.0), 200, AdversaryConfig(eta=0.0),
                                    RngStream(0))
        assert paired.success
        assert not paired.dataset0.has_missing

    def test_budget_accounting(self):
        paired = coupling_adversary(BigEta(d=20, s=1.0), 400, AdversaryConfig(eta=0.3), RngStream(1))
        remaining = paired.budget_final.per_coordinate_remaining
        assert np.array_equal(remaining + paired.edits_per_coordinate, np.full(20, 120))
        assert list(paired.dataset0.missing_counts()[:-1]) == list(paired.edits_per_coordinate)

    def test_thread_count_does_not_change_result(self):
        spec = BigEta(d=20, s=1.0)
        cfg = AdversaryConfig(eta=0.3)
        one = coupling_adversary(spec, 2500, cfg, RngStream(9), threads=1)
        three = coupling_adversary(spec, 2500, cfg, RngStream(9), threads=3)
        assert one.dataset0.identical_to(three.dataset0)
        assert one.manifest() == three.manifest()

    def test_save(self, tmp_path):
        paired = coupling_adversary(BigEta(d=10, s=1.0), 100, AdversaryConfig(eta=0.45), RngStream(2))
        paired.save(tmp_path / "out")
        manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
        assert manifest["success"] == paired.success
        assert manifest["spec"]["regime"] == "big-eta"
        assert (tmp_path / "out" / "dataset0.jsonl").exists()
        assert (tmp_path / "out" / "dataset1.jsonl").exists()

    def test_rejects_empty(self):
        with pytest.raises(InvalidInputError):
            coupling_adversary(BigEta(d=10, s=1.0), 0, AdversaryConfig(eta=0.1), RngStream(0))


class TestObliviousErasure:
    def test_within_budget(self, clean):
        out = oblivious_erasure(clean, 0.1, RngStream(4))
        counts = out.missing_counts()
        assert counts.max() <= 100
        assert counts.min() > 50

    def test_deterministic(self, clean):
        assert oblivious_erasure(clean, 0.2, RngStream(4)).identical_to(oblivious_erasure(clean, 0.2, RngStream(4)))

    def test_only_erases(self, clean):
        out = oblivious_erasure(clean, 0.2, RngStream(4))
        kept = ~np.isnan(out.X)
        assert np.array_equal(out.X[kept], clean.X[kept])


class TestSignFlip:
    def test_flips_exactly_budget(self, clean):
        out = sign_flip_replacement(clean, 0.02)
        counts = modified_counts(clean, out)
        assert list(counts) == [20] * 5 + [0]
        assert np.array_equal(out.y, clean.y)

    def test_flips_largest_products(self, clean):
        out = sign_flip_replacement(clean, 0.01)
        flipped = out.X[:, 0] != clean.X[:, 0]
        score = np.abs(clean.y * clean.X[:, 0])
        assert score[flipped].min() >= score[~flipped].max()

    def test_zero_budget_is_identity(self, clean):
        assert sign_flip_replacement(clean, 0.0).identical_to(clean)

    def test_no_erasures(self, clean):
        assert not sign_flip_replacement(clean, 0.1).has_missing
