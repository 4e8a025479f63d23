import logging
import math

import numpy as np
from pydantic import BaseModel, Field

from .cgs import TopicModel
from .corpus import Corpus, Document
from .seeding import content_rng

logger = logging.getLogger("dp-lda")

DEFAULT_FOLD_IN_ITERS = 50


class OutOfVocabularyError(ValueError):
    """A held-out token has no column in the model."""


class PerplexityReport(BaseModel):
    perplexity: float = Field(gt=0)
    n_test_tokens: int
    n_test_documents: int
    fold_in_iters: int
    seed: int


def fold_in_theta(
    model: TopicModel, doc: Document, fold_in_iters: int, rng: np.random.Generator
) -> np.ndarray:
    """
    Document-topic proportions of a held-out document, by Gibbs sampling its
    topic assignments with phi frozen. Only the document counts change.
    """
    K, alpha = model.K, model.hyper.alpha
    tokens = doc.tokens.tolist()
    z = rng.integers(0, K, size=len(tokens))
    n_k = np.bincount(z, minlength=K).astype(np.float64)
    for _ in range(fold_in_iters):
        for i, t in enumerate(tokens):
            n_k[z[i]] -= 1
            weights = model.phi[:, t] * (n_k + alpha)
            cdf = np.cumsum(weights)
            k = min(int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right")), K - 1)
            n_k[k] += 1
            z[i] = k
    return (n_k + alpha) / (len(tokens) + K * alpha)


def perplexity(
    model: TopicModel, test: Corpus, fold_in_iters: int = DEFAULT_FOLD_IN_ITERS, seed: int = 0
) -> PerplexityReport:
    """
    exp(-sum log p(token) / n_tokens) over the non-empty test documents, with
    p(token) = sum_k theta_k phi_k,t and theta from fold-in.
    """
    if fold_in_iters < 0:
        raise ValueError(f"fold_in_iters must be >= 0, got {fold_in_iters}")
    V = model.phi.shape[1]
    if test.V != V:
        raise OutOfVocabularyError(
            f"Test corpus has {test.V} word types but the model has {V}; map it onto the model vocabulary first."
        )

    log_liks: list[float] = []
    n_tokens = 0
    n_docs = 0
    for doc in test.documents:
        if len(doc) == 0:
            continue
        rng = content_rng(seed, "fold-in", doc.tokens)
        theta = fold_in_theta(model, doc, fold_in_iters, rng)
        log_liks.append(float(np.log(theta @ model.phi[:, doc.tokens]).sum()))
        n_tokens += len(doc)
        n_docs += 1

    if n_tokens == 0:
        raise ValueError("Test corpus has no tokens; perplexity is undefined.")
    value = math.exp(-math.fsum(log_liks) / n_tokens)
    logger.info(f"📉 Perplexity {value:.4f} over {n_docs} documents / {n_tokens} tokens")
    return PerplexityReport(
        perplexity=value,
        n_test_tokens=n_tokens,
        n_test_documents=n_docs,
        fold_in_iters=fold_in_iters,
        seed=seed,
    )


def top_words(model: TopicModel, k: int, n: int) -> list[str]:
    """The n highest-probability words of topic k; ties go to the smaller word id."""
    V = model.phi.shape[1]
    if not 0 <= n <= V:
        raise ValueError(f"n must be in [0, {V}], got {n}")
    row = model.phi[k]
    order = np.lexsort((np.arange(V), -row))[:n]
    return [model.vocab.words[t] for t in order.tolist()]
