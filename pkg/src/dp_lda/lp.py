"""
Locally private LDA training (LP-LDA).

Client side: every document is encoded as a presence vector over the
vocabulary and each bit goes through randomized response (kept with
probability 1 - f, otherwise replaced by a fair coin). Only the perturbed
vectors cross into the server side, where column counts are de-biased,
vectors are adjusted to match the estimated counts and CGS runs on the
reconstructed documents. Everything after perturbation is post-processing,
so each contributor keeps ln((1 - f/2) / (f/2)) local privacy.
"""

import json
import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, computed_field

from .cgs import CountMatrices, Hyperparams, TopicModel, train
from .corpus import BinaryDocVector, Corpus, Vocabulary, corpus_from_vectors, encode_binary
from .seeding import derive_rng

logger = logging.getLogger("dp-lda")


class InfiniteEpsilonError(ValueError):
    """f = 0 releases every bit unchanged: there is no local privacy."""


def rr_epsilon(f: float) -> float:
    if f <= 0:
        raise InfiniteEpsilonError(f"Flip probability f={f} gives infinite epsilon (no local privacy).")
    if f > 1:
        raise ValueError(f"Flip probability must be in (0, 1], got {f}")
    return math.log((1 - f / 2) / (f / 2))


def rr_flip_for_epsilon(epsilon: float) -> float:
    if epsilon < 0:
        raise ValueError(f"epsilon must be >= 0, got {epsilon}")
    return 2.0 / (math.exp(epsilon) + 1.0)


class FlipConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    f: float = Field(gt=0.0, le=1.0)

    @computed_field
    @property
    def epsilon(self) -> float:
        return rr_epsilon(self.f)

    @classmethod
    def from_epsilon(cls, epsilon: float) -> "FlipConfig":
        return cls(f=rr_flip_for_epsilon(epsilon))


@dataclass(frozen=True, eq=False)
class NoisyCounts:
    n_t: np.ndarray
    M: int
    f: float


@dataclass(frozen=True, eq=False)
class ReconstructedCorpus:
    vectors: list[BinaryDocVector]
    corpus: Corpus


@dataclass(frozen=True, eq=False)
class PerturbedBatch:
    """Everything the server receives from contributors."""

    vectors: list[BinaryDocVector]
    V: int
    f: float

    @property
    def M(self) -> int:
        return len(self.vectors)


def flip_bits(bits: np.ndarray, f: float, rng: np.random.Generator) -> np.ndarray:
    """Randomized response on every entry of `bits`, any shape."""
    if not 0 <= f <= 1:
        raise ValueError(f"Flip probability must be in [0, 1], got {f}")
    keep = rng.random(bits.shape) < 1 - f
    coins = (rng.random(bits.shape) < 0.5).astype(np.uint8)
    return np.where(keep, bits, coins).astype(np.uint8)


def perturb_vector(v: BinaryDocVector, f: float, rng: np.random.Generator) -> BinaryDocVector:
    return BinaryDocVector(v.doc_id, flip_bits(v.bits, f, rng))


def perturb_corpus(corpus: Corpus, f: float, seed: int) -> PerturbedBatch:
    """Client role: each document is encoded and perturbed with its own stream."""
    vectors = [
        perturb_vector(encode_binary(doc, corpus.V), f, derive_rng(seed, f"perturb/{doc.doc_id}"))
        for doc in corpus.documents
    ]
    return PerturbedBatch(vectors, corpus.V, f)


def _stack(vectors: Sequence[BinaryDocVector]) -> np.ndarray:
    lengths = {len(v) for v in vectors}
    if len(lengths) > 1:
        raise ValueError(f"Vectors have mixed lengths: {sorted(lengths)}")
    if not vectors:
        return np.zeros((0, 0), dtype=np.uint8)
    return np.stack([v.bits for v in vectors]).astype(np.uint8)


def aggregate(vectors: Sequence[BinaryDocVector], f: float) -> NoisyCounts:
    matrix = _stack(vectors)
    return NoisyCounts(matrix.sum(axis=0, dtype=np.int64), len(vectors), f)


def estimate_true_counts(nc: NoisyCounts) -> np.ndarray:
    """Unbiased estimate (2 n_t - f M) / (2 (1 - f)); not clamped."""
    if nc.f >= 1:
        raise ValueError("f=1 erases all information; the count estimator is undefined.")
    return (2.0 * nc.n_t - nc.f * nc.M) / (2.0 * (1.0 - nc.f))


def estimator_variance(f: float, M: int) -> float:
    if not 0 <= f < 1:
        raise ValueError(f"f must be in [0, 1), got {f}")
    return (2 - f) * f * M / (4 * (1 - f) ** 2)


def round_half_away(x: np.ndarray) -> np.ndarray:
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def reconstruct(
    vectors: Sequence[BinaryDocVector], nc: NoisyCounts, vocab: Vocabulary, seed: int
) -> ReconstructedCorpus:
    """
    Adjusts every column to its estimated true count by setting (or clearing)
    the bit in uniformly chosen vectors, then emits one token per set bit.
    """
    matrix = _stack(vectors).copy()
    M = matrix.shape[0]
    if M != nc.M or (M and matrix.shape[1] != nc.n_t.size):
        raise ValueError("Noisy counts do not match the vectors they were aggregated from.")
    if M and matrix.shape[1] != vocab.V:
        raise ValueError(f"Vectors have length {matrix.shape[1]} but the vocabulary has {vocab.V} words.")

    target = np.clip(round_half_away(estimate_true_counts(nc)), 0, M).astype(np.int64)
    delta = target - nc.n_t
    for t in np.flatnonzero(delta).tolist():
        rng = derive_rng(seed, f"reconstruct/{t}")
        column = matrix[:, t]
        if delta[t] > 0:
            pool = np.flatnonzero(column == 0)
            value = 1
        else:
            pool = np.flatnonzero(column == 1)
            value = 0
        need = abs(int(delta[t]))
        assert need <= pool.size, f"column {t}: need {need} vectors, only {pool.size} available"
        matrix[rng.choice(pool, size=need, replace=False), t] = value

    adjusted = [BinaryDocVector(v.doc_id, matrix[i]) for i, v in enumerate(vectors)]
    corpus = corpus_from_vectors(adjusted, vocab)
    logger.info(
        f"🧩 Reconstructed {M} documents: {int(np.abs(delta).sum())} bits adjusted, W={corpus.W}"
    )
    return ReconstructedCorpus(adjusted, corpus)


def server_train(
    batch: PerturbedBatch, vocab: Vocabulary, hyper: Hyperparams, n_iters: int, seed: int
) -> tuple[TopicModel, CountMatrices, ReconstructedCorpus]:
    """Server role: aggregate, reconstruct and train; never sees the original corpus."""
    if batch.V != vocab.V:
        raise ValueError(f"Batch has V={batch.V} but the vocabulary has {vocab.V} words.")
    nc = aggregate(batch.vectors, batch.f)
    rebuilt = reconstruct(batch.vectors, nc, vocab, seed)
    model, counts = train(rebuilt.corpus, hyper, n_iters, seed)
    return model, counts, rebuilt


def lp_train(
    corpus: Corpus, flip: FlipConfig, hyper: Hyperparams, n_iters: int, seed: int
) -> tuple[TopicModel, PerturbedBatch]:
    """Both roles in one process; the batch is what the server saw."""
    logger.info(f"📡 LP-LDA with f={flip.f:.6g} (local epsilon {flip.epsilon:.4f})")
    batch = perturb_corpus(corpus, flip.f, seed)
    model, _, _ = server_train(batch, corpus.vocab, hyper, n_iters, seed)
    return model, batch


def write_perturbed_batch(batch: PerturbedBatch, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(json.dumps({"M": batch.M, "V": batch.V, "f": batch.f}) + "\n")
        for v in batch.vectors:
            f.write("".join("1" if bit else "0" for bit in v.bits.tolist()) + "\n")
    return path


def read_perturbed_batch(path: str | Path) -> PerturbedBatch:
    path = Path(path)
    with open(path, "r", encoding="utf-8") as f:
        header = json.loads(f.readline())
        rows = [line.rstrip("\n") for line in f if line.strip()]
    M, V, f_value = int(header["M"]), int(header["V"]), float(header["f"])
    if len(rows) != M:
        raise ValueError(f"{path}: header declares M={M} but {len(rows)} vectors follow")
    vectors = []
    for m, row in enumerate(rows):
        if len(row) != V or set(row) - {"0", "1"}:
            raise ValueError(f"{path}:{m + 2}: expected {V} characters of '0'/'1'")
        vectors.append(BinaryDocVector(m, np.frombuffer(row.encode("ascii"), dtype=np.uint8) - ord("0")))
    return PerturbedBatch(vectors, V, f_value)
