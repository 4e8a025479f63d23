import hashlib

import numpy as np

SEED_MASK = (1 << 64) - 1


def _key(data: bytes) -> int:
    return int.from_bytes(hashlib.blake2b(data, digest_size=8).digest(), "little")


def derive_rng(seed: int, label: str) -> np.random.Generator:
    """Generator for one component of a run, keyed by a fixed label."""
    entropy = [seed & SEED_MASK, _key(label.encode("utf-8"))]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def content_rng(seed: int, label: str, tokens: np.ndarray) -> np.random.Generator:
    """
    Generator keyed by document content instead of position, so results do
    not depend on the order documents are visited in.
    """
    digest = _key(np.ascontiguousarray(tokens, dtype="<i8").tobytes())
    entropy = [seed & SEED_MASK, _key(label.encode("utf-8")), digest]
    return np.random.default_rng(np.random.SeedSequence(entropy))
