import gzip
import logging
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import TextIO

import numpy as np

from .seeding import derive_rng

logger = logging.getLogger("dp-lda")


class CorpusFormatError(ValueError):
    """Raised when a UCI bag-of-words file cannot be parsed."""

    def __init__(self, path: str | Path, line_no: int, message: str) -> None:
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = str(path)
        self.line_no = line_no


class VocabularyRangeError(CorpusFormatError):
    """A triple references a word id outside the declared vocabulary."""


class EmptyVocabularyError(ValueError):
    """Preprocessing removed every vocabulary word."""


@dataclass(frozen=True)
class Vocabulary:
    words: tuple[str, ...]
    index: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if len(self.words) < 1:
            raise ValueError("Vocabulary must contain at least one word.")
        index = {word: i for i, word in enumerate(self.words)}
        if len(index) != len(self.words):
            raise ValueError("Vocabulary contains duplicate words.")
        object.__setattr__(self, "index", index)

    def __len__(self) -> int:
        return len(self.words)

    @property
    def V(self) -> int:
        return len(self.words)

    @classmethod
    def synthetic(cls, size: int) -> "Vocabulary":
        # UCI word ids are 1-based
        return cls(tuple(f"w{i}" for i in range(1, size + 1)))


@dataclass(frozen=True, eq=False)
class Document:
    doc_id: int
    tokens: np.ndarray

    def __len__(self) -> int:
        return int(self.tokens.size)

    @classmethod
    def of(cls, doc_id: int, tokens: Iterable[int]) -> "Document":
        return cls(doc_id, np.fromiter(tokens, dtype=np.int64))


@dataclass(frozen=True, eq=False)
class Corpus:
    documents: tuple[Document, ...]
    vocab: Vocabulary

    def __post_init__(self) -> None:
        V = self.vocab.V
        for doc in self.documents:
            if doc.tokens.size and (doc.tokens.min() < 0 or doc.tokens.max() >= V):
                raise ValueError(
                    f"Document {doc.doc_id} has token ids outside [0, {V})."
                )

    @property
    def M(self) -> int:
        return len(self.documents)

    @property
    def V(self) -> int:
        return self.vocab.V

    @property
    def W(self) -> int:
        return sum(len(doc) for doc in self.documents)

    @property
    def N_max(self) -> int:
        return max((len(doc) for doc in self.documents), default=0)

    def word_counts(self) -> np.ndarray:
        counts = np.zeros(self.V, dtype=np.int64)
        for doc in self.documents:
            counts += np.bincount(doc.tokens, minlength=self.V)
        return counts


@dataclass(frozen=True, eq=False)
class BinaryDocVector:
    doc_id: int
    bits: np.ndarray

    def __post_init__(self) -> None:
        if self.bits.ndim != 1:
            raise ValueError("Binary document vector must be one-dimensional.")
        if self.bits.size and not np.isin(self.bits, (0, 1)).all():
            raise ValueError("Binary document vector must only hold 0/1 values.")

    def __len__(self) -> int:
        return int(self.bits.size)


def _open_text(path: Path) -> TextIO:
    if path.suffix == ".gz":
        return gzip.open(path, "rt", encoding="utf-8")
    return open(path, "r", encoding="utf-8")


def _vocab_sidecar(path: Path) -> Path | None:
    candidates = [path.with_suffix(".vocab")]
    name = path.name.removesuffix(".gz")
    if name.startswith("docword."):
        candidates.append(path.with_name("vocab." + name.removeprefix("docword.")))
    for candidate in candidates:
        if candidate.exists():
            return candidate
    return None


def _header_value(path: Path, line_no: int, line: str, name: str) -> int:
    try:
        value = int(line.strip())
    except ValueError:
        raise CorpusFormatError(path, line_no, f"expected integer {name}, got {line.strip()!r}")
    if value < 0:
        raise CorpusFormatError(path, line_no, f"{name} must be nonnegative")
    return value


def load_vocabulary(path: str | Path) -> Vocabulary:
    with _open_text(Path(path)) as f:
        return Vocabulary(tuple(line.strip() for line in f if line.strip()))


def load_uci_bag_of_words(path: str | Path, vocab_path: str | Path | None = None) -> Corpus:
    """
    Reads a UCI bag-of-words file: D, V and NNZ on the first three lines, then
    one "docID wordID count" triple per line with 1-based ids. Each triple
    contributes `count` repetitions of the word to the document.
    """
    path = Path(path)
    with _open_text(path) as f:
        lines = f.readlines()
    if len(lines) < 3:
        raise CorpusFormatError(path, len(lines) + 1, "missing D/V/NNZ header")

    n_docs = _header_value(path, 1, lines[0], "D")
    n_words = _header_value(path, 2, lines[1], "V")
    nnz = _header_value(path, 3, lines[2], "NNZ")

    entries: list[list[tuple[int, int]]] = [[] for _ in range(n_docs)]
    seen = 0
    for line_no, line in enumerate(lines[3:], start=4):
        parts = line.split()
        if not parts:
            continue
        if len(parts) != 3:
            raise CorpusFormatError(path, line_no, f"expected 'docID wordID count', got {line.strip()!r}")
        try:
            doc_id, word_id, count = (int(p) for p in parts)
        except ValueError:
            raise CorpusFormatError(path, line_no, f"non-integer field in {line.strip()!r}")
        if not 1 <= doc_id <= n_docs:
            raise CorpusFormatError(path, line_no, f"docID {doc_id} outside [1, {n_docs}]")
        if not 1 <= word_id <= n_words:
            raise VocabularyRangeError(path, line_no, f"wordID {word_id} outside [1, {n_words}]")
        if count < 0:
            raise CorpusFormatError(path, line_no, f"negative count {count}")
        seen += 1
        if count:
            entries[doc_id - 1].append((word_id - 1, count))

    if seen != nnz:
        logger.warning(f"⚠️ {path}: header declares NNZ={nnz} but {seen} triples were read.")

    vocab_file = Path(vocab_path) if vocab_path is not None else _vocab_sidecar(path)
    if vocab_file is not None:
        vocab = load_vocabulary(vocab_file)
        if vocab.V != n_words:
            raise CorpusFormatError(
                vocab_file, vocab.V, f"vocabulary has {vocab.V} words but the header declares V={n_words}"
            )
    else:
        vocab = Vocabulary.synthetic(n_words)

    documents = []
    for m, pairs in enumerate(entries):
        words = np.array([w for w, _ in pairs], dtype=np.int64)
        counts = np.array([c for _, c in pairs], dtype=np.int64)
        documents.append(Document(m, np.repeat(words, counts)))

    corpus = Corpus(tuple(documents), vocab)
    logger.info(f"📚 Loaded {path}: M={corpus.M}, V={corpus.V}, W={corpus.W}, N_max={corpus.N_max}")
    return corpus


def write_uci_bag_of_words(corpus: Corpus, path: str | Path, write_vocab: bool = True) -> Path:
    """Writes the corpus in UCI format; the vocabulary goes to a `.vocab` sidecar."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    triples: list[str] = []
    for m, doc in enumerate(corpus.documents, start=1):
        counts = np.bincount(doc.tokens, minlength=corpus.V)
        for word in np.flatnonzero(counts):
            triples.append(f"{m} {word + 1} {counts[word]}")
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"{corpus.M}\n{corpus.V}\n{len(triples)}\n")
        for triple in triples:
            f.write(triple + "\n")
    if write_vocab:
        with open(path.with_suffix(".vocab"), "w", encoding="utf-8") as f:
            for word in corpus.vocab.words:
                f.write(word + "\n")
    return path


def load_stopwords(path: str | Path) -> frozenset[str]:
    """Plain-text stopword list, one word per line; `#` starts a comment line."""
    with open(path, "r", encoding="utf-8") as f:
        return frozenset(
            line.strip() for line in f if line.strip() and not line.startswith("#")
        )


def restrict_vocabulary(corpus: Corpus, vocab: Vocabulary) -> Corpus:
    """Re-expresses the corpus over `vocab`, dropping tokens whose word it lacks."""
    mapping = np.array([vocab.index.get(word, -1) for word in corpus.vocab.words], dtype=np.int64)
    documents = []
    for doc in corpus.documents:
        mapped = mapping[doc.tokens]
        documents.append(Document(doc.doc_id, mapped[mapped >= 0]))
    return Corpus(tuple(documents), vocab)


def preprocess(corpus: Corpus, stopwords: Iterable[str], top_v: int) -> Corpus:
    """
    Keeps the `top_v` most frequent non-stopword types, unused vocabulary words
    included. Frequency ties at the cutoff go to the lexicographically smaller
    word. Empty documents are kept.
    """
    if top_v < 1:
        raise ValueError(f"top_v must be >= 1, got {top_v}")
    stop = frozenset(stopwords)
    freq = corpus.word_counts()
    words = corpus.vocab.words
    candidates = [t for t in range(corpus.V) if words[t] not in stop]
    if not candidates:
        raise EmptyVocabularyError(
            f"All {corpus.V} vocabulary words are stopwords; nothing is left to rank for top_v={top_v}."
        )
    if top_v > len(candidates):
        logger.warning(
            f"⚠️ top_v={top_v} exceeds the {len(candidates)} non-stopword types; keeping all."
        )
    ranked = sorted(candidates, key=lambda t: (-int(freq[t]), words[t]))[:top_v]
    vocab = Vocabulary(tuple(words[t] for t in sorted(ranked)))
    pruned = restrict_vocabulary(corpus, vocab)
    logger.info(f"✂️ Pruned vocabulary {corpus.V} -> {pruned.V}, tokens {corpus.W} -> {pruned.W}")
    return pruned


def split_train_test(corpus: Corpus, n_test: int, seed: int) -> tuple[Corpus, Corpus]:
    if not 0 <= n_test <= corpus.M:
        raise ValueError(f"n_test must be in [0, {corpus.M}], got {n_test}")
    rng = derive_rng(seed, "split")
    test_idx = set(rng.permutation(corpus.M)[:n_test].tolist())
    train = tuple(doc for i, doc in enumerate(corpus.documents) if i not in test_idx)
    test = tuple(doc for i, doc in enumerate(corpus.documents) if i in test_idx)
    return Corpus(train, corpus.vocab), Corpus(test, corpus.vocab)


def encode_binary(doc: Document, V: int) -> BinaryDocVector:
    if doc.tokens.size and (doc.tokens.min() < 0 or doc.tokens.max() >= V):
        raise ValueError(f"Document {doc.doc_id} has token ids outside [0, {V}).")
    bits = np.zeros(V, dtype=np.uint8)
    bits[doc.tokens] = 1
    return BinaryDocVector(doc.doc_id, bits)


def binarize_corpus(corpus: Corpus) -> Corpus:
    """Every document reduced to its distinct words, in word-id order."""
    documents = tuple(Document(doc.doc_id, np.unique(doc.tokens)) for doc in corpus.documents)
    return Corpus(documents, corpus.vocab)


def corpus_from_vectors(vectors: Sequence[BinaryDocVector], vocab: Vocabulary) -> Corpus:
    """One document per vector, one token per set bit."""
    documents = tuple(
        Document(v.doc_id, np.flatnonzero(v.bits).astype(np.int64)) for v in vectors
    )
    return Corpus(documents, vocab)
