import numpy as np
import pytest
from pydantic import ValidationError

from dp_lda.cgs import CountMatrices, Hyperparams, init_assignments, train
from dp_lda.laplace import (
    LaplaceConfig,
    baseline_train,
    baseline_word_count_variance,
    privatize_counts,
    variance_crossover_epsilon,
)
from dp_lda.lp import estimator_variance, rr_flip_for_epsilon

GRID = [1.0, 2.0, 3.0, 6.0, 8.0]


def flat_counts(K: int, V: int, value: int) -> CountMatrices:
    n_kt = np.full((K, V), value, dtype=np.int64)
    n_mk = np.full((2, K), value, dtype=np.int64)
    return CountMatrices(n_kt, n_mk, n_kt.sum(axis=1), n_mk.sum(axis=1), [np.zeros(0, dtype=np.int64)] * 2)


class TestCalibration:
    def test_scale(self):
        cfg = LaplaceConfig(epsilon=2.0, K=50)
        assert cfg.per_entry_scale == 25.0
        assert baseline_word_count_variance(1.0, 50) == 5000.0

    def test_rejects_nonpositive_epsilon(self):
        with pytest.raises(ValidationError):
            LaplaceConfig(epsilon=0.0, K=5)
        with pytest.raises(ValueError):
            baseline_word_count_variance(0.0, 5)

    def test_empirical_variance(self):
        """Rounded Laplace noise of scale b has variance 2 b^2 + 1/12."""
        counts = flat_counts(10, 100_000, 1000)
        noisy = privatize_counts(counts, LaplaceConfig(epsilon=1.0, K=10), np.random.default_rng(5))
        delta = (noisy.n_kt - 1000).ravel()
        assert abs(delta.mean()) < 0.1
        assert delta.var() == pytest.approx(2 * 10.0**2 + 1 / 12, rel=0.02)


class TestPrivatize:
    def test_clamped_and_consistent(self):
        counts = flat_counts(4, 30, 0)
        noisy = privatize_counts(counts, LaplaceConfig(epsilon=0.5, K=4), np.random.default_rng(1))
        assert (noisy.n_kt >= 0).all() and (noisy.n_mk >= 0).all()
        assert noisy.violations() == []
        assert noisy.n_kt.any()

    def test_assignments_are_copied(self, small_corpus):
        counts = init_assignments(small_corpus, Hyperparams(K=2), seed=0)
        noisy = privatize_counts(counts, LaplaceConfig(epsilon=1.0, K=2), np.random.default_rng(0))
        noisy.z[0][0] = 1 - noisy.z[0][0]
        assert noisy.z[0][0] != counts.z[0][0]


class TestVarianceComparison:
    def test_crossover_for_large_corpus(self):
        assert variance_crossover_epsilon(10_000, 50, GRID) == 3.0

    def test_lp_wins_everywhere_on_small_corpus(self):
        assert variance_crossover_epsilon(3000, 50, GRID) == 1.0

    @pytest.mark.parametrize("epsilon", [6.0, 7.0, 8.0])
    def test_lp_is_less_noisy_at_weak_privacy(self, epsilon):
        lp = estimator_variance(rr_flip_for_epsilon(epsilon), 3000)
        assert lp < baseline_word_count_variance(epsilon, 50)

    def test_no_crossover_on_grid(self):
        assert variance_crossover_epsilon(10**9, 50, [1.0, 2.0]) is None


class TestBaselineTrain:
    def test_model_is_well_formed(self, planted):
        model, counts = baseline_train(planted, Hyperparams(K=2), epsilon=1.0, n_iters=5, seed=0)
        np.testing.assert_allclose(model.phi.sum(axis=1), 1.0)
        assert counts.violations() == []

    def test_deterministic(self, small_corpus):
        a, _ = baseline_train(small_corpus, Hyperparams(K=2), 0.5, 5, seed=7)
        b, _ = baseline_train(small_corpus, Hyperparams(K=2), 0.5, 5, seed=7)
        np.testing.assert_array_equal(a.phi, b.phi)

    def test_negligible_noise_matches_plain_training(self, small_corpus):
        hyper = Hyperparams(K=3)
        noised, _ = baseline_train(small_corpus, hyper, 1e7, 6, seed=2)
        plain, _ = train(small_corpus, hyper, 6, seed=2)
        np.testing.assert_array_equal(noised.phi, plain.phi)

    def test_rejects_negative_iterations(self, small_corpus):
        with pytest.raises(ValueError):
            baseline_train(small_corpus, Hyperparams(K=2), 1.0, -1, seed=0)
