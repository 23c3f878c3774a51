"""Character alphabet and one-hot quantization for the char-level model;
whitespace tokenization with character offsets and vocabulary/embedding
lookup for the word-level model.

All codec objects are immutable after construction and every operation
here is pure.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

# 26 lowercase letters, 10 digits, 33 punctuation/symbol characters.
# Space is deliberately absent: spaces (and occlusion whitespace) encode
# as all-zero columns. Uppercase input folds to lowercase before lookup.
DEFAULT_ALPHABET_CHARS = (
    "abcdefghijklmnopqrstuvwxyz"
    "0123456789"
    "-,;.!?:'\"/\\|_@#$%^&*~`+=<>()[]{}\n"
)

_TOKEN_RE = re.compile(r"\S+")

_ESCAPES = {"\\n": "\n", "\\t": "\t", "\\\\": "\\"}


class Alphabet:
    """Ordered set of characters with stable indices."""

    def __init__(self, chars: str = DEFAULT_ALPHABET_CHARS):
        if len(set(chars)) != len(chars):
            raise ValueError("alphabet contains duplicate characters")
        self.chars = chars
        self.index = {c: i for i, c in enumerate(chars)}

    def __len__(self) -> int:
        return len(self.chars)

    def lookup(self, ch: str) -> int | None:
        """Index of a character, folding uppercase; None if out of alphabet."""
        return self.index.get(ch.lower())

    @classmethod
    def from_file(cls, path) -> "Alphabet":
        """One character per line; \\n, \\t and \\\\ escapes accepted."""
        chars = []
        with open(path, encoding="utf-8") as f:
            for line in f:
                entry = line.rstrip("\n")
                if not entry:
                    continue
                chars.append(_ESCAPES.get(entry, entry))
        bad = [c for c in chars if len(c) != 1]
        if bad:
            raise ValueError(f"alphabet entries must be single characters: {bad!r}")
        return cls("".join(chars))


@dataclass(frozen=True)
class Token:
    word: str
    char_start: int
    char_end: int


def tokenize(text: str) -> list[Token]:
    """Maximal runs of non-whitespace characters, with exact offsets."""
    return [Token(m.group(), m.start(), m.end()) for m in _TOKEN_RE.finditer(text)]


@dataclass(frozen=True)
class Doc:
    """A text with word tokenization; the unit every pipeline consumes."""

    id: str
    text: str
    label: str | None = None
    tokens: tuple[Token, ...] = field(default=())

    @classmethod
    def make(cls, text: str, id: str = "", label: str | None = None) -> "Doc":
        return cls(id=id, text=text, label=label, tokens=tuple(tokenize(text)))

    def with_text(self, text: str) -> "Doc":
        return Doc.make(text, id=self.id, label=self.label)


class Vocabulary:
    """Word -> dense index map with an embedding table; index 0 is unknown."""

    def __init__(self, words: list[str], dim: int = 32, seed: int = 0,
                 embedding: np.ndarray | None = None):
        self.index = {"<unk>": 0}
        for w in words:
            lw = w.lower()
            if lw not in self.index:
                self.index[lw] = len(self.index)
        self.words = sorted(self.index, key=self.index.get)
        self.dim = dim
        if embedding is not None:
            if embedding.shape != (len(self.index), dim):
                raise ValueError(f"embedding shape {embedding.shape} != "
                                 f"({len(self.index)}, {dim})")
            self.embedding = np.asarray(embedding, dtype=np.float64)
        else:
            rng = np.random.default_rng(seed)
            bound = np.sqrt(6.0 / (len(self.index) + dim))
            self.embedding = rng.uniform(-bound, bound, (len(self.index), dim))
        if not np.all(np.isfinite(self.embedding)):
            raise ValueError("embedding rows must be finite")

    def __len__(self) -> int:
        return len(self.index)

    def lookup(self, word: str) -> int:
        return self.index.get(word.lower(), 0)

    @classmethod
    def from_docs(cls, docs, dim: int = 32, seed: int = 0) -> "Vocabulary":
        words = []
        for doc in docs:
            words.extend(t.word for t in doc.tokens)
        return cls(words, dim=dim, seed=seed)

    @classmethod
    def from_vector_file(cls, path) -> "Vocabulary":
        """One line per word: the word followed by D whitespace-separated floats."""
        words, rows = [], []
        with open(path, encoding="utf-8") as f:
            for ln, line in enumerate(f, 1):
                parts = line.split()
                if not parts:
                    continue
                if len(parts) < 2:
                    raise ValueError(f"line {ln}: word with no vector")
                words.append(parts[0])
                rows.append([float(v) for v in parts[1:]])
        if not rows:
            raise ValueError("empty word-vector file")
        dim = len(rows[0])
        if any(len(r) != dim for r in rows):
            raise ValueError("inconsistent vector dimensions")
        vocab = cls.__new__(cls)
        vocab.index = {"<unk>": 0}
        table = [np.zeros(dim)]
        for w, r in zip(words, rows):
            lw = w.lower()
            if lw not in vocab.index:
                vocab.index[lw] = len(vocab.index)
                table.append(np.asarray(r, dtype=np.float64))
        vocab.words = sorted(vocab.index, key=vocab.index.get)
        vocab.dim = dim
        vocab.embedding = np.stack(table)
        if not np.all(np.isfinite(vocab.embedding)):
            raise ValueError("embedding rows must be finite")
        return vocab


@dataclass(frozen=True)
class EncodedChars:
    """L x |A| one-hot grid. Row i encodes text character i (i < L);
    out-of-alphabet characters and padding are all-zero rows."""

    grid: np.ndarray
    n_mapped: int  # = min(len(text), L): rows mapping back to source offsets


@dataclass(frozen=True)
class EncodedWords:
    """Fixed-length sequence of embedding-row indices; unknown words and
    padding map to index 0. token_rows[i] is the row of token i (< T)."""

    indices: np.ndarray
    token_rows: tuple[int, ...]


def encode_chars(doc: Doc, alphabet: Alphabet, length: int) -> EncodedChars:
    if length <= 0:
        raise ValueError("length must be positive")
    grid = np.zeros((length, len(alphabet)), dtype=np.float64)
    n = min(len(doc.text), length)
    for i in range(n):
        j = alphabet.lookup(doc.text[i])
        if j is not None:
            grid[i, j] = 1.0
    return EncodedChars(grid=grid, n_mapped=n)


def decode_chars(grid: np.ndarray, alphabet: Alphabet) -> str:
    """Per row: argmax character when the max entry exceeds 0.5, else a
    space. Trailing padding spaces are stripped."""
    out = []
    for row in np.asarray(grid):
        j = int(row.argmax())
        out.append(alphabet.chars[j] if row[j] > 0.5 else " ")
    return "".join(out).rstrip(" ")


def encode_words(doc: Doc, vocab: Vocabulary, length: int) -> EncodedWords:
    if length <= 0:
        raise ValueError("length must be positive")
    indices = np.zeros(length, dtype=np.int64)
    rows = []
    for i, tok in enumerate(doc.tokens[:length]):
        indices[i] = vocab.lookup(tok.word)
        rows.append(i)
    return EncodedWords(indices=indices, token_rows=tuple(rows))
