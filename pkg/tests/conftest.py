from pathlib import Path

import pytest

from dp_lda.cgs import Hyperparams
from dp_lda.corpus import Corpus, Document, Vocabulary
from dp_lda.synthetic import planted_corpus

TINY_DOCWORD = """3
5
6
1 1 2
1 3 1
2 2 4
2 5 1
3 4 3
3 1 1
"""

TINY_VOCAB = "apple\nbanana\ncherry\ndate\nelder\n"


@pytest.fixture
def tiny_uci(tmp_path: Path) -> Path:
    """Three documents over five words, with a vocabulary sidecar."""
    path = tmp_path / "tiny.txt"
    path.write_text(TINY_DOCWORD)
    (tmp_path / "tiny.vocab").write_text(TINY_VOCAB)
    return path


@pytest.fixture
def small_corpus() -> Corpus:
    vocab = Vocabulary(("a", "b", "c", "d"))
    docs = (
        Document.of(0, [0, 0, 1, 2]),
        Document.of(1, [3, 3, 2]),
        Document.of(2, [1]),
        Document.of(3, [0, 1, 2, 3, 3]),
    )
    return Corpus(docs, vocab)


@pytest.fixture(scope="session")
def planted() -> Corpus:
    return planted_corpus(n_docs=80, V=20, K=2, doc_len=20, seed=3, doc_alpha=0.05)


@pytest.fixture(scope="session")
def planted_split() -> tuple[Corpus, Corpus]:
    corpus = planted_corpus(n_docs=120, V=30, K=3, doc_len=25, seed=11)
    train = Corpus(corpus.documents[:100], corpus.vocab)
    test = Corpus(corpus.documents[100:], corpus.vocab)
    return train, test


@pytest.fixture
def hyper2() -> Hyperparams:
    return Hyperparams(K=2, alpha=0.1, beta=0.01)
