import gzip
import logging

import numpy as np
import pytest

from dp_lda.corpus import (
    BinaryDocVector,
    Corpus,
    CorpusFormatError,
    Document,
    EmptyVocabularyError,
    Vocabulary,
    VocabularyRangeError,
    binarize_corpus,
    corpus_from_vectors,
    encode_binary,
    load_stopwords,
    load_uci_bag_of_words,
    preprocess,
    restrict_vocabulary,
    split_train_test,
    write_uci_bag_of_words,
)

from conftest import TINY_DOCWORD, TINY_VOCAB


class TestLoadUci:
    def test_shape_and_tokens(self, tiny_uci):
        corpus = load_uci_bag_of_words(tiny_uci)
        assert (corpus.M, corpus.V, corpus.W, corpus.N_max) == (3, 5, 12, 5)
        assert corpus.vocab.words == ("apple", "banana", "cherry", "date", "elder")
        assert corpus.documents[0].tokens.tolist() == [0, 0, 2]
        assert corpus.documents[1].tokens.tolist() == [1, 1, 1, 1, 4]
        assert sorted(corpus.documents[2].tokens.tolist()) == [0, 3, 3, 3]

    def test_synthetic_names_without_sidecar(self, tmp_path):
        path = tmp_path / "bare.txt"
        path.write_text(TINY_DOCWORD)
        corpus = load_uci_bag_of_words(path)
        assert corpus.vocab.words == ("w1", "w2", "w3", "w4", "w5")

    def test_uci_vocab_naming_and_gzip(self, tmp_path):
        path = tmp_path / "docword.tiny.txt.gz"
        with gzip.open(path, "wt", encoding="utf-8") as f:
            f.write(TINY_DOCWORD)
        (tmp_path / "vocab.tiny.txt").write_text(TINY_VOCAB)
        corpus = load_uci_bag_of_words(path)
        assert corpus.vocab.words[0] == "apple"
        assert corpus.W == 12

    def test_word_id_out_of_range(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("1\n2\n1\n1 3 1\n")
        with pytest.raises(VocabularyRangeError) as info:
            load_uci_bag_of_words(path)
        assert info.value.line_no == 4

    @pytest.mark.parametrize(
        "text",
        ["1\n", "x\n2\n1\n", "1\n2\n1\n1 2\n", "1\n2\n1\n1 two 1\n", "1\n2\n1\n2 1 1\n", "1\n2\n1\n1 1 -1\n"],
    )
    def test_malformed_input(self, tmp_path, text):
        path = tmp_path / "bad.txt"
        path.write_text(text)
        with pytest.raises(CorpusFormatError):
            load_uci_bag_of_words(path)

    def test_nnz_mismatch_only_warns(self, tmp_path, caplog):
        path = tmp_path / "nnz.txt"
        path.write_text("1\n2\n5\n1 1 1\n")
        with caplog.at_level(logging.WARNING, logger="dp-lda"):
            corpus = load_uci_bag_of_words(path)
        assert corpus.W == 1
        assert "NNZ=5" in caplog.text

    def test_sidecar_size_must_match_header(self, tmp_path):
        path = tmp_path / "tiny.txt"
        path.write_text(TINY_DOCWORD)
        (tmp_path / "tiny.vocab").write_text("only\ntwo\n")
        with pytest.raises(CorpusFormatError):
            load_uci_bag_of_words(path)

    def test_written_corpus_loads_back(self, tmp_path, small_corpus):
        path = write_uci_bag_of_words(small_corpus, tmp_path / "out" / "small.txt")
        loaded = load_uci_bag_of_words(path)
        assert loaded.vocab == small_corpus.vocab
        for a, b in zip(loaded.documents, small_corpus.documents):
            assert sorted(a.tokens.tolist()) == sorted(b.tokens.tolist())


class TestVocabulary:
    def test_rejects_duplicates_and_empty(self):
        with pytest.raises(ValueError):
            Vocabulary(("a", "a"))
        with pytest.raises(ValueError):
            Vocabulary(())

    def test_index(self):
        vocab = Vocabulary(("x", "y"))
        assert vocab.index == {"x": 0, "y": 1}
        assert len(vocab) == vocab.V == 2

    def test_corpus_rejects_out_of_range_tokens(self):
        with pytest.raises(ValueError):
            Corpus((Document.of(0, [0, 2]),), Vocabulary(("a", "b")))


class TestPreprocess:
    def test_stopwords_and_top_v(self, tiny_uci):
        corpus = load_uci_bag_of_words(tiny_uci)
        pruned = preprocess(corpus, {"banana"}, top_v=2)
        assert pruned.vocab.words == ("apple", "date")
        assert pruned.documents[0].tokens.tolist() == [0, 0]
        assert len(pruned.documents[1]) == 0
        assert pruned.M == corpus.M

    def test_ties_go_to_lexicographically_smaller_word(self, tiny_uci):
        corpus = load_uci_bag_of_words(tiny_uci)
        pruned = preprocess(corpus, {"banana"}, top_v=3)
        assert pruned.vocab.words == ("apple", "cherry", "date")

    def test_top_v_larger_than_vocabulary_keeps_all(self, tiny_uci, caplog):
        corpus = load_uci_bag_of_words(tiny_uci)
        with caplog.at_level(logging.WARNING, logger="dp-lda"):
            pruned = preprocess(corpus, set(), top_v=100)
        assert pruned.V == 5
        assert pruned.W == corpus.W
        assert "top_v=100" in caplog.text

    def test_full_vocabulary_keeps_the_corpus(self):
        corpus = Corpus((Document.of(0, [0, 1, 0]), Document.of(1, [1])), Vocabulary(("a", "b", "c")))
        pruned = preprocess(corpus, set(), top_v=3)
        assert pruned.vocab == corpus.vocab
        for before, after in zip(corpus.documents, pruned.documents):
            np.testing.assert_array_equal(before.tokens, after.tokens)

    def test_unused_words_compete_for_the_cutoff(self):
        corpus = Corpus((Document.of(0, [2, 2]),), Vocabulary(("c", "b", "a")))
        pruned = preprocess(corpus, set(), top_v=2)
        assert pruned.vocab.words == ("b", "a")
        assert pruned.documents[0].tokens.tolist() == [1, 1]

    def test_all_stopwords(self, small_corpus):
        with pytest.raises(EmptyVocabularyError, match="top_v=2"):
            preprocess(small_corpus, {"a", "b", "c", "d"}, top_v=2)

    def test_rejects_nonpositive_top_v(self, small_corpus):
        with pytest.raises(ValueError):
            preprocess(small_corpus, set(), 0)

    def test_stopword_file(self, tmp_path):
        path = tmp_path / "stop.txt"
        path.write_text("# common words\nthe\n\nand\n")
        assert load_stopwords(path) == frozenset({"the", "and"})

    def test_restrict_vocabulary_drops_missing_words(self, small_corpus):
        restricted = restrict_vocabulary(small_corpus, Vocabulary(("d", "a")))
        assert restricted.documents[0].tokens.tolist() == [1, 1]
        assert restricted.documents[1].tokens.tolist() == [0, 0]
        assert len(restricted.documents[2]) == 0


class TestSplit:
    def test_sizes_and_disjointness(self, planted):
        train, test = split_train_test(planted, 20, seed=5)
        assert (train.M, test.M) == (60, 20)
        ids = [d.doc_id for d in train.documents] + [d.doc_id for d in test.documents]
        assert sorted(ids) == list(range(planted.M))

    def test_deterministic_and_order_preserving(self, planted):
        a_train, a_test = split_train_test(planted, 20, seed=5)
        b_train, b_test = split_train_test(planted, 20, seed=5)
        assert [d.doc_id for d in a_test.documents] == [d.doc_id for d in b_test.documents]
        ids = [d.doc_id for d in a_train.documents]
        assert ids == sorted(ids)

    def test_rejects_too_many_test_documents(self, small_corpus):
        with pytest.raises(ValueError):
            split_train_test(small_corpus, 5, seed=0)


class TestBinaryEncoding:
    def test_encode_marks_presence(self):
        v = encode_binary(Document.of(7, [2, 2, 0]), 4)
        assert v.doc_id == 7
        assert v.bits.tolist() == [1, 0, 1, 0]

    def test_encode_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            encode_binary(Document.of(0, [4]), 4)

    def test_vector_must_be_binary(self):
        with pytest.raises(ValueError):
            BinaryDocVector(0, np.array([0, 2], dtype=np.uint8))

    def test_binarize_keeps_distinct_words(self, small_corpus):
        binary = binarize_corpus(small_corpus)
        assert binary.documents[0].tokens.tolist() == [0, 1, 2]
        assert binary.documents[1].tokens.tolist() == [2, 3]
        assert binary.W == 3 + 2 + 1 + 4

    def test_vectors_to_corpus(self, small_corpus):
        vectors = [encode_binary(d, small_corpus.V) for d in small_corpus.documents]
        rebuilt = corpus_from_vectors(vectors, small_corpus.vocab)
        expected = binarize_corpus(small_corpus)
        for a, b in zip(rebuilt.documents, expected.documents):
            assert a.tokens.tolist() == b.tokens.tolist()
