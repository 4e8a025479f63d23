import numpy as np

from .corpus import Corpus, Document, Vocabulary
from .seeding import derive_rng


def planted_phi(V: int, K: int) -> np.ndarray:
    """Topic k is uniform over its own contiguous block of the vocabulary."""
    if not 1 <= K <= V:
        raise ValueError(f"Need 1 <= K <= V, got K={K}, V={V}")
    phi = np.zeros((K, V))
    for k, block in enumerate(np.array_split(np.arange(V), K)):
        phi[k, block] = 1.0 / block.size
    return phi


def planted_corpus(
    n_docs: int,
    V: int,
    K: int,
    doc_len: int,
    seed: int,
    doc_alpha: float = 0.1,
) -> Corpus:
    """
    Documents drawn from the planted topics with theta ~ Dirichlet(doc_alpha);
    a small doc_alpha makes most documents nearly single-topic.
    """
    rng = derive_rng(seed, "synthetic")
    phi = planted_phi(V, K)
    documents = []
    for m in range(n_docs):
        theta = rng.dirichlet(np.full(K, doc_alpha))
        topics = rng.choice(K, size=doc_len, p=theta)
        tokens = np.array([rng.choice(V, p=phi[k]) for k in topics.tolist()], dtype=np.int64)
        documents.append(Document(m, tokens))
    return Corpus(tuple(documents), Vocabulary(tuple(f"w{t:04d}" for t in range(V))))
