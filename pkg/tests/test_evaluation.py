import numpy as np
import pytest

from dp_lda.cgs import Hyperparams, TopicModel, train
from dp_lda.corpus import Corpus, Document, Vocabulary
from dp_lda.evaluation import OutOfVocabularyError, fold_in_theta, perplexity, top_words


def uniform_model(K: int, V: int) -> TopicModel:
    return TopicModel(np.full((K, V), 1.0 / V), Hyperparams(K=K), Vocabulary.synthetic(V))


class TestPerplexity:
    def test_uniform_model_gives_vocabulary_size(self, planted_split):
        _, test = planted_split
        report = perplexity(uniform_model(4, test.V), test, fold_in_iters=5, seed=0)
        assert report.perplexity == pytest.approx(test.V, rel=1e-9)
        assert report.n_test_tokens == test.W
        assert report.n_test_documents == test.M

    def test_single_topic_forced_arithmetic(self):
        phi = np.full((1, 11), 0.001)
        phi[0, 0] = 0.99
        model = TopicModel(phi, Hyperparams(K=1), Vocabulary.synthetic(11))
        test = Corpus((Document.of(0, [0] * 10),), model.vocab)
        assert perplexity(model, test, 10, seed=3).perplexity == pytest.approx(1 / 0.99)

    def test_trained_model_beats_uniform(self, planted_split):
        train_corpus, test = planted_split
        values = []
        for seed in range(3):
            model, _ = train(train_corpus, Hyperparams(K=3), 30, seed)
            values.append(perplexity(model, test, 20, seed).perplexity)
        assert np.median(values) * 2 <= test.V

    def test_invariant_to_document_order(self, planted_split):
        train_corpus, test = planted_split
        model, _ = train(train_corpus, Hyperparams(K=3), 5, seed=1)
        reversed_test = Corpus(tuple(reversed(test.documents)), test.vocab)
        a = perplexity(model, test, 10, seed=4)
        b = perplexity(model, reversed_test, 10, seed=4)
        assert a.perplexity == b.perplexity

    def test_empty_documents_are_excluded(self, planted_split):
        _, test = planted_split
        row = np.linspace(1, 2, test.V)
        model = TopicModel(np.tile(row / row.sum(), (2, 1)), Hyperparams(K=2), test.vocab)
        padded = Corpus(test.documents + (Document.of(999, []),), test.vocab)
        a = perplexity(model, test, 5, seed=0)
        b = perplexity(model, padded, 5, seed=0)
        assert a.perplexity == b.perplexity
        assert b.n_test_documents == test.M

    def test_no_tokens(self):
        model = uniform_model(2, 3)
        with pytest.raises(ValueError):
            perplexity(model, Corpus((Document.of(0, []),), model.vocab))

    def test_vocabulary_size_mismatch(self, small_corpus):
        with pytest.raises(OutOfVocabularyError):
            perplexity(uniform_model(2, 7), small_corpus)

    def test_rerun_is_identical(self, planted_split):
        _, test = planted_split
        model = uniform_model(3, test.V)
        assert perplexity(model, test, 3, seed=9) == perplexity(model, test, 3, seed=9)


class TestFoldIn:
    def test_theta_is_a_distribution(self):
        model = uniform_model(3, 5)
        theta = fold_in_theta(model, Document.of(0, [0, 1, 4, 4]), 10, np.random.default_rng(0))
        assert theta.shape == (3,)
        assert theta.sum() == pytest.approx(1.0)
        assert (theta > 0).all()

    def test_concentrates_on_the_generating_topic(self):
        phi = np.array([[0.5, 0.5, 0.0, 0.0], [0.0, 0.0, 0.5, 0.5]]) * 0.98 + 0.005
        model = TopicModel(phi, Hyperparams(K=2, alpha=0.1), Vocabulary.synthetic(4))
        theta = fold_in_theta(model, Document.of(0, [2, 3] * 10), 30, np.random.default_rng(1))
        assert theta[1] > 0.9


class TestTopWords:
    def test_order_and_ties(self):
        phi = np.array([[0.1, 0.4, 0.1, 0.4], [0.25, 0.25, 0.25, 0.25]])
        model = TopicModel(phi, Hyperparams(K=2), Vocabulary(("a", "b", "c", "d")))
        assert top_words(model, 0, 3) == ["b", "d", "a"]
        assert top_words(model, 1, 4) == ["a", "b", "c", "d"]
        assert top_words(model, 0, 0) == []

    def test_rejects_too_many_words(self):
        with pytest.raises(ValueError):
            top_words(uniform_model(1, 3), 0, 4)
