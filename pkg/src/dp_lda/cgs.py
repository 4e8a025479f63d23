import logging
from dataclasses import dataclass
from typing import Protocol

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from .corpus import Corpus, Vocabulary
from .seeding import derive_rng

logger = logging.getLogger("dp-lda")


class Hyperparams(BaseModel):
    model_config = ConfigDict(frozen=True)

    K: int = Field(50, ge=1)
    alpha: float = Field(0.1, gt=0)
    beta: float = Field(0.01, gt=0)


@dataclass(eq=False)
class CountMatrices:
    """
    Sufficient statistics of the sampler.

    n_kt: K x V topic-word counts
    n_mk: M x K document-topic counts
    n_k: per-topic totals, n_m: per-document totals
    z: per-document topic assignments aligned with the tokens
    """

    n_kt: np.ndarray
    n_mk: np.ndarray
    n_k: np.ndarray
    n_m: np.ndarray
    z: list[np.ndarray]

    @property
    def K(self) -> int:
        return int(self.n_kt.shape[0])

    @property
    def V(self) -> int:
        return int(self.n_kt.shape[1])

    def copy(self) -> "CountMatrices":
        return CountMatrices(
            self.n_kt.copy(), self.n_mk.copy(), self.n_k.copy(), self.n_m.copy(),
            [zm.copy() for zm in self.z],
        )

    def remove(self, m: int, t: int, k: int) -> None:
        # counts may be decoupled from z after noise injection; never go negative
        if self.n_kt[k, t] > 0:
            self.n_kt[k, t] -= 1
            self.n_k[k] -= 1
        if self.n_mk[m, k] > 0:
            self.n_mk[m, k] -= 1
            self.n_m[m] -= 1

    def add(self, m: int, t: int, k: int) -> None:
        self.n_kt[k, t] += 1
        self.n_k[k] += 1
        self.n_mk[m, k] += 1
        self.n_m[m] += 1

    def violations(self, corpus: Corpus | None = None) -> list[str]:
        """
        Broken invariants. Totals and nonnegativity are always checked; with a
        corpus, agreement with document lengths and with z is checked too.
        """
        found = []
        if (self.n_kt < 0).any() or (self.n_mk < 0).any():
            found.append("negative count entries")
        if not np.array_equal(self.n_kt.sum(axis=1), self.n_k):
            found.append("n_k differs from the row sums of n_kt")
        if not np.array_equal(self.n_mk.sum(axis=1), self.n_m):
            found.append("n_m differs from the row sums of n_mk")
        if corpus is not None:
            lengths = np.array([len(doc) for doc in corpus.documents], dtype=np.int64)
            if not np.array_equal(self.n_m, lengths):
                found.append("n_m differs from document lengths")
            if int(self.n_k.sum()) != corpus.W:
                found.append("topic totals do not add up to W")
            for m, doc in enumerate(corpus.documents):
                zm = self.z[m]
                if zm.size != len(doc) or (zm.size and (zm.min() < 0 or zm.max() >= self.K)):
                    found.append(f"z of document {m} is malformed")
                    break
                if not np.array_equal(np.bincount(zm, minlength=self.K), self.n_mk[m]):
                    found.append(f"z of document {m} disagrees with n_mk")
                    break
            else:
                rebuilt = np.zeros_like(self.n_kt)
                for m, doc in enumerate(corpus.documents):
                    np.add.at(rebuilt, (self.z[m], doc.tokens), 1)
                if not np.array_equal(rebuilt, self.n_kt):
                    found.append("z disagrees with n_kt")
        return found

    def check_invariants(self, corpus: Corpus | None = None) -> None:
        found = self.violations(corpus)
        if found:
            raise ValueError("Count invariants violated: " + "; ".join(found))


@dataclass(frozen=True, eq=False)
class SamplingDistribution:
    r: np.ndarray
    p: np.ndarray

    @classmethod
    def from_masses(cls, r: np.ndarray) -> "SamplingDistribution":
        return cls(r, r / r.sum())


@dataclass(frozen=True, eq=False)
class TopicModel:
    phi: np.ndarray
    hyper: Hyperparams
    vocab: Vocabulary

    @property
    def K(self) -> int:
        return int(self.phi.shape[0])

    @classmethod
    def from_counts(cls, counts: CountMatrices, hyper: Hyperparams, vocab: Vocabulary) -> "TopicModel":
        return cls(estimate_phi(counts, hyper), hyper, vocab)


@dataclass(frozen=True, eq=False)
class SamplingEvent:
    """One sampling step, seen with the current token removed from the counts."""

    position: int
    doc: int
    word: int
    counts: CountMatrices
    dist: SamplingDistribution


class SamplingObserver(Protocol):
    def on_sampling(self, event: SamplingEvent) -> None:
        ...

    def on_iteration_end(self, iteration: int) -> None:
        ...


def init_assignments(corpus: Corpus, hyper: Hyperparams, seed: int) -> CountMatrices:
    """Assigns every token a uniformly random topic."""
    rng = derive_rng(seed, "init")
    K, V, M = hyper.K, corpus.V, corpus.M
    n_kt = np.zeros((K, V), dtype=np.int64)
    n_mk = np.zeros((M, K), dtype=np.int64)
    z = []
    for m, doc in enumerate(corpus.documents):
        topics = rng.integers(0, K, size=len(doc))
        np.add.at(n_kt, (topics, doc.tokens), 1)
        n_mk[m] = np.bincount(topics, minlength=K)
        z.append(topics)
    return CountMatrices(n_kt, n_mk, n_kt.sum(axis=1), n_mk.sum(axis=1), z)


def full_conditional(counts: CountMatrices, m: int, t: int, hyper: Hyperparams) -> SamplingDistribution:
    """Unnormalized topic masses; expects the current token already removed from the counts."""
    word_term = (counts.n_kt[:, t] + hyper.beta) / (counts.n_k + counts.V * hyper.beta)
    doc_term = (counts.n_mk[m] + hyper.alpha) / (counts.n_m[m] + counts.K * hyper.alpha)
    return SamplingDistribution.from_masses(word_term * doc_term)


def sample_topic(dist: SamplingDistribution, rng: np.random.Generator) -> int:
    cdf = np.cumsum(dist.p)
    k = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
    return min(k, cdf.size - 1)


def run_iteration(
    corpus: Corpus,
    counts: CountMatrices,
    hyper: Hyperparams,
    rng: np.random.Generator,
    hook: SamplingObserver | None = None,
) -> CountMatrices:
    """
    Resamples every token once, documents in index order and tokens in
    position order. The hook sees each distribution before the new topic is
    committed and must not consume randomness.
    """
    position = 0
    for m, doc in enumerate(corpus.documents):
        zm = counts.z[m]
        for i, t in enumerate(doc.tokens.tolist()):
            counts.remove(m, t, int(zm[i]))
            dist = full_conditional(counts, m, t, hyper)
            if hook is not None:
                hook.on_sampling(SamplingEvent(position, m, t, counts, dist))
            k = sample_topic(dist, rng)
            counts.add(m, t, k)
            zm[i] = k
            position += 1
    return counts


def sample_chain(
    corpus: Corpus,
    counts: CountMatrices,
    hyper: Hyperparams,
    n_iters: int,
    rng: np.random.Generator,
    hook: SamplingObserver | None = None,
) -> CountMatrices:
    for iteration in range(1, n_iters + 1):
        run_iteration(corpus, counts, hyper, rng, hook)
        if hook is not None:
            hook.on_iteration_end(iteration)
        if iteration % 50 == 0 or iteration == n_iters:
            logger.debug(f"  [CGS iteration {iteration}/{n_iters}]")
    return counts


def train(
    corpus: Corpus,
    hyper: Hyperparams,
    n_iters: int,
    seed: int,
    hook: SamplingObserver | None = None,
) -> tuple[TopicModel, CountMatrices]:
    """A single chain; phi is read from the counts after the last iteration."""
    if n_iters < 0:
        raise ValueError(f"n_iters must be >= 0, got {n_iters}")
    logger.info(
        f"🎲 Training LDA: K={hyper.K}, alpha={hyper.alpha}, beta={hyper.beta}, "
        f"iterations={n_iters}, W={corpus.W}, seed={seed}"
    )
    counts = init_assignments(corpus, hyper, seed)
    sample_chain(corpus, counts, hyper, n_iters, derive_rng(seed, "cgs"), hook)
    return TopicModel.from_counts(counts, hyper, corpus.vocab), counts


def estimate_phi(counts: CountMatrices, hyper: Hyperparams) -> np.ndarray:
    smoothed = counts.n_kt + hyper.beta
    return smoothed / smoothed.sum(axis=1, keepdims=True)


def estimate_theta(counts: CountMatrices, hyper: Hyperparams) -> np.ndarray:
    return (counts.n_mk + hyper.alpha) / (counts.n_m[:, None] + counts.K * hyper.alpha)
