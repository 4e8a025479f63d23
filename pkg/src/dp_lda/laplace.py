import logging
from collections.abc import Iterable

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, computed_field

from .cgs import CountMatrices, Hyperparams, TopicModel, init_assignments, sample_chain
from .corpus import Corpus
from .lp import estimator_variance, rr_flip_for_epsilon
from .seeding import derive_rng

logger = logging.getLogger("dp-lda")

MECHANISM = "laplace-init"


class LaplaceConfig(BaseModel):
    """
    Noise calibration for the count matrices. The per-entry scale K / epsilon
    gives each entry the variance 2 K^2 / epsilon^2 quoted for this baseline.
    """

    model_config = ConfigDict(frozen=True)

    epsilon: float = Field(gt=0)
    K: int = Field(ge=1)

    @computed_field
    @property
    def per_entry_scale(self) -> float:
        return self.K / self.epsilon


def privatize_counts(counts: CountMatrices, cfg: LaplaceConfig, rng: np.random.Generator) -> CountMatrices:
    """
    One Laplace draw per entry of n_kt and n_mk, rounded and clamped at zero;
    totals are recomputed from the noisy matrices and z is left untouched.
    """
    scale = cfg.per_entry_scale
    n_kt = counts.n_kt + rng.laplace(0.0, scale, size=counts.n_kt.shape)
    n_mk = counts.n_mk + rng.laplace(0.0, scale, size=counts.n_mk.shape)
    n_kt = np.maximum(np.rint(n_kt), 0).astype(np.int64)
    n_mk = np.maximum(np.rint(n_mk), 0).astype(np.int64)
    return CountMatrices(n_kt, n_mk, n_kt.sum(axis=1), n_mk.sum(axis=1), [zm.copy() for zm in counts.z])


def baseline_word_count_variance(epsilon: float, K: int) -> float:
    if epsilon <= 0:
        raise ValueError(f"epsilon must be > 0, got {epsilon}")
    return 2 * K**2 / epsilon**2


def variance_crossover_epsilon(M: int, K: int, grid: Iterable[float]) -> float | None:
    """
    Smallest epsilon on the grid from which the LP-LDA count estimator is
    less noisy than the Laplace baseline at every larger grid point.
    """
    points = sorted(grid)
    crossover = None
    for epsilon in reversed(points):
        lp = estimator_variance(rr_flip_for_epsilon(epsilon), M)
        if lp < baseline_word_count_variance(epsilon, K):
            crossover = epsilon
        else:
            break
    return crossover


def baseline_train(
    corpus: Corpus, hyper: Hyperparams, epsilon: float, n_iters: int, seed: int
) -> tuple[TopicModel, CountMatrices]:
    """Noise once at initialization, then the unmodified sampling loop."""
    if n_iters < 0:
        raise ValueError(f"n_iters must be >= 0, got {n_iters}")
    cfg = LaplaceConfig(epsilon=epsilon, K=hyper.K)
    logger.info(f"🔊 Laplace baseline: epsilon={epsilon}, per-entry scale b={cfg.per_entry_scale:.4f}")
    counts = init_assignments(corpus, hyper, seed)
    counts = privatize_counts(counts, cfg, derive_rng(seed, "laplace"))
    sample_chain(corpus, counts, hyper, n_iters, derive_rng(seed, "cgs"))
    return TopicModel.from_counts(counts, hyper, corpus.vocab), counts
