import numpy as np
import pytest

from dp_lda.synthetic import planted_corpus, planted_phi


def test_planted_topics_own_disjoint_blocks():
    phi = planted_phi(10, 3)
    np.testing.assert_allclose(phi.sum(axis=1), 1.0)
    assert ((phi > 0).sum(axis=0) == 1).all()


def test_rejects_more_topics_than_words():
    with pytest.raises(ValueError):
        planted_phi(2, 3)


def test_corpus_shape_and_determinism():
    a = planted_corpus(n_docs=12, V=16, K=4, doc_len=9, seed=5)
    b = planted_corpus(n_docs=12, V=16, K=4, doc_len=9, seed=5)
    assert (a.M, a.V, a.W) == (12, 16, 108)
    assert a.vocab.words[0] == "w0000"
    for x, y in zip(a.documents, b.documents):
        np.testing.assert_array_equal(x.tokens, y.tokens)
