"""Codec tests: one-hot quantization, decode, tokenization offsets, and
vocabulary lookup, including the randomized roundtrip properties."""

import numpy as np
import pytest

from advtext.codec import (Alphabet, Doc, Vocabulary, decode_chars, encode_chars,
                           encode_words, tokenize)

RNG = np.random.default_rng


class TestAlphabet:
    def test_default_has_69_characters(self):
        assert len(Alphabet()) == 69

    def test_duplicates_rejected(self):
        with pytest.raises(ValueError):
            Alphabet("abca")

    def test_uppercase_folds(self):
        a = Alphabet("abc")
        assert a.lookup("B") == 1

    def test_from_file_with_escapes(self, tmp_path):
        path = tmp_path / "alpha.txt"
        path.write_text("a\nb\n\\n\n\\t\n\\\\\n", encoding="utf-8")
        a = Alphabet.from_file(path)
        assert a.chars == "ab\n\t\\"

    def test_from_file_rejects_multichar_entries(self, tmp_path):
        path = tmp_path / "alpha.txt"
        path.write_text("ab\n", encoding="utf-8")
        with pytest.raises(ValueError):
            Alphabet.from_file(path)


class TestEncodeChars:
    def test_c_is_third_dimension(self):
        a = Alphabet()
        enc = encode_chars(Doc.make("c"), a, 4)
        expected = np.zeros(69)
        expected[2] = 1.0
        np.testing.assert_array_equal(enc.grid[0], expected)

    def test_empty_text_is_all_zero(self):
        enc = encode_chars(Doc.make(""), Alphabet(), 8)
        assert enc.grid.shape == (8, 69)
        assert not enc.grid.any()

    def test_ab_with_two_letter_alphabet(self):
        enc = encode_chars(Doc.make("ab"), Alphabet("ab"), 3)
        np.testing.assert_array_equal(enc.grid,
                                      [[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])

    def test_truncation_and_padding(self):
        a = Alphabet("abc")
        enc = encode_chars(Doc.make("abcabc"), a, 4)
        assert enc.n_mapped == 4
        assert enc.grid[3, 0] == 1.0  # 4th char 'a'

    def test_out_of_alphabet_columns_all_zero(self):
        enc = encode_chars(Doc.make("a b"), Alphabet("ab"), 3)
        assert not enc.grid[1].any()  # space is not in the alphabet

    def test_column_property_random(self):
        a = Alphabet()
        rng = RNG(0)
        for _ in range(50):
            n = int(rng.integers(0, 40))
            text = "".join(rng.choice(list(a.chars + "  ÜÆ"), size=n))
            grid = encode_chars(Doc.make(text), a, 32).grid
            counts = (grid != 0).sum(axis=1)
            assert np.all(counts <= 1)
            assert np.all(np.isin(grid, (0.0, 1.0)))


class TestDecodeChars:
    def test_roundtrip_cat(self):
        a = Alphabet()
        assert decode_chars(encode_chars(Doc.make("cat"), a, 8).grid, a) == "cat"

    def test_all_zero_column_is_space(self):
        a = Alphabet("ab")
        grid = np.zeros((3, 2))
        grid[0, 1] = 1.0
        grid[2, 0] = 1.0
        assert decode_chars(grid, a) == "b a"

    def test_continuous_grid_nearest_character(self):
        # per-column argmax worked out by hand on a 3-column grid
        a = Alphabet("abc")
        grid = np.array([[0.2, 0.9, 0.1],
                         [0.4, 0.45, 0.3],
                         [0.51, 0.1, 0.2]])
        assert decode_chars(grid, a) == "b a"

    def test_roundtrip_random_in_alphabet(self):
        a = Alphabet()
        rng = RNG(1)
        chars = list(a.chars.replace("\n", ""))
        for _ in range(200):
            n = int(rng.integers(1, 33))
            text = "".join(rng.choice(chars, size=n))
            grid = encode_chars(Doc.make(text), a, 40).grid
            assert decode_chars(grid, a) == text


class TestTokenize:
    def test_offsets_example(self):
        tokens = tokenize("Edward & Mrs. Simpson")
        assert [(t.word, t.char_start, t.char_end) for t in tokens] == [
            ("Edward", 0, 6), ("&", 7, 8), ("Mrs.", 9, 13), ("Simpson", 14, 21)]

    def test_empty(self):
        assert tokenize("") == []

    def test_double_space(self):
        tokens = tokenize("a  b")
        assert [(t.word, t.char_start, t.char_end) for t in tokens] == [
            ("a", 0, 1), ("b", 3, 4)]

    def test_offsets_reconstruct_words_random(self):
        rng = RNG(2)
        vocab = ["cat", "sat", "on", "-", "a", "mat!", "&", "Mrs.", "very"]
        for _ in range(200):
            n = int(rng.integers(0, 12))
            parts = []
            for _ in range(n):
                parts.append(rng.choice(vocab))
                parts.append(" " * int(rng.integers(1, 4)))
            text = "".join(parts)
            for t in tokenize(text):
                assert text[t.char_start:t.char_end] == t.word

    def test_idempotent_under_rejoin(self):
        text = "  the cat  sat\ton the mat  "
        words = [t.word for t in tokenize(text)]
        again = [t.word for t in tokenize(" ".join(words))]
        assert words == again


class TestVocabulary:
    def test_lookup_and_unknown(self):
        v = Vocabulary(["Great", "movie"], dim=4, seed=0)
        assert v.lookup("great") == 1
        assert v.lookup("GREAT") == 1
        assert v.lookup("nope") == 0

    def test_encode_words_example(self):
        v = Vocabulary(["w%d" % i for i in range(4)] + ["great", "movie"],
                       dim=4, seed=0)
        assert v.lookup("great") == 5
        doc = Doc.make("great movie")
        enc = encode_words(doc, v, 8)
        assert list(enc.indices[:3]) == [5, 6, 0]
        assert enc.token_rows == (0, 1)

    def test_truncation(self):
        v = Vocabulary(["a"], dim=2, seed=0)
        doc = Doc.make(" ".join("a" for _ in range(40)))
        enc = encode_words(doc, v, 32)
        assert enc.indices.shape == (32,)
        assert enc.token_rows == tuple(range(32))

    def test_embedding_rows_finite_and_shaped(self):
        v = Vocabulary(["x", "y"], dim=6, seed=3)
        assert v.embedding.shape == (3, 6)
        assert np.all(np.isfinite(v.embedding))

    def test_vector_file_import(self, tmp_path):
        path = tmp_path / "vecs.txt"
        path.write_text("good 1.0 2.0\nbad -1.0 0.5\n", encoding="utf-8")
        v = Vocabulary.from_vector_file(path)
        assert v.dim == 2
        np.testing.assert_array_equal(v.embedding[v.lookup("good")], [1.0, 2.0])
        np.testing.assert_array_equal(v.embedding[0], [0.0, 0.0])

    def test_vector_file_dimension_mismatch(self, tmp_path):
        path = tmp_path / "vecs.txt"
        path.write_text("good 1.0 2.0\nbad -1.0\n", encoding="utf-8")
        with pytest.raises(ValueError):
            Vocabulary.from_vector_file(path)


class TestDoc:
    def test_tokens_satisfy_invariant(self):
        doc = Doc.make("the cat sat")
        for t in doc.tokens:
            assert doc.text[t.char_start:t.char_end] == t.word

    def test_with_text_rederives_tokens(self):
        doc = Doc.make("a b", id="x", label="L")
        new = doc.with_text("aaa bbb ccc")
        assert new.id == "x" and new.label == "L"
        assert len(new.tokens) == 3
