"""White-box identification pipeline: per-sample hot characters -> hot
words -> hot phrases, corpus-level hot training phrases, the word-level
gradient variant, and the gradient-sign baseline on one-hot grids.

Scores are cost-gradient magnitudes: the gradient of the cross-entropy
cost for a chosen class is taken with respect to the encoded input, and
each position is scored by the maximum absolute component across its
encoding dimensions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import engine
from .codec import Doc, decode_chars
from .models import ClassifierHandle

DEFAULT_HOT_CHARS = 50
DEFAULT_HOT_WORDS = 5
MIN_HOT_CHARS_PER_WORD = 3
DEFAULT_TOP_PHRASES = 10


@dataclass(frozen=True)
class CharScore:
    position: int
    score: float


@dataclass(frozen=True)
class HotSpan:
    """A scored span of tokens [start, end) within one Doc."""

    start: int
    end: int
    surface: str
    score: float
    kind: str  # word | phrase


@dataclass(frozen=True)
class HtpEntry:
    phrase: str
    cls: str
    frequency: int
    rank: int


def normalize_phrase(phrase: str) -> str:
    return " ".join(phrase.lower().split())


def _class_index(handle: ClassifierHandle, cls: str) -> int:
    try:
        return handle.classes.index(cls)
    except ValueError:
        raise ValueError(f"unknown class {cls!r}") from None


def char_scores(handle: ClassifierHandle, doc: Doc, cls: str) -> list[CharScore]:
    """One score per character position inside the encoded window:
    max over alphabet dimensions of the absolute cost gradient."""
    if handle.kind != "char":
        raise ValueError("char_scores needs a char-kind model (use word_scores)")
    label = _class_index(handle, cls)
    grid = handle.encode(doc.text)
    grad = engine.loss_and_gradients(handle.net, grid, label).wrt_input
    n = min(len(doc.text), handle.length)
    mags = np.abs(grad[:n]).max(axis=1) if n else np.zeros(0)
    return [CharScore(position=i, score=float(mags[i])) for i in range(n)]


def word_scores(handle: ClassifierHandle, doc: Doc, cls: str) -> list[float]:
    """Per-token score: max over embedding dimensions of the absolute
    cost gradient of that token's embedded row. Tokens beyond the encoded
    window score 0."""
    if handle.kind != "word":
        raise ValueError("word_scores needs a word-kind model (use char_scores)")
    label = _class_index(handle, cls)
    indices = handle.encode(doc.text)
    grad = engine.loss_and_gradients(handle.net, indices, label).wrt_input
    mags = np.abs(grad).max(axis=1)  # (T,)
    scores = []
    for i in range(len(doc.tokens)):
        scores.append(float(mags[i]) if i < handle.length else 0.0)
    return scores


def _assemble_phrases(doc: Doc, hot_words: list[int],
                      word_score: dict[int, float]) -> list[HotSpan]:
    """Maximal runs of adjacent hot words become phrases; isolated hot
    words become single-word phrases. Sorted by descending score."""
    spans: list[HotSpan] = []
    i = 0
    hot = sorted(hot_words)
    while i < len(hot):
        j = i
        while j + 1 < len(hot) and hot[j + 1] == hot[j] + 1:
            j += 1
        start, end = hot[i], hot[j] + 1
        surface = doc.text[doc.tokens[start].char_start:doc.tokens[end - 1].char_end]
        score = sum(word_score[t] for t in hot[i:j + 1])
        spans.append(HotSpan(start=start, end=end, surface=surface, score=score,
                             kind="phrase"))
        i = j + 1
    spans.sort(key=lambda s: (-s.score, s.start))
    return spans


def hot_items(doc: Doc, scores: list[CharScore], k: int = DEFAULT_HOT_CHARS,
              ) -> tuple[list[int], list[int], list[HotSpan]]:
    """Top-k hot character positions; hot words (tokens holding at least
    three hot characters); hot phrases (maximal adjacent runs)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    values = [s.score for s in scores]
    order = sorted(range(len(values)), key=lambda i: (-values[i], i))
    hot_chars = sorted(order[:k])
    hot_set = set(hot_chars)
    score_at = {s.position: s.score for s in scores}
    hot_words: list[int] = []
    word_score: dict[int, float] = {}
    for ti, tok in enumerate(doc.tokens):
        inside = [p for p in range(tok.char_start, tok.char_end) if p in hot_set]
        if len(inside) >= MIN_HOT_CHARS_PER_WORD:
            hot_words.append(ti)
            word_score[ti] = sum(score_at[p] for p in inside)
    phrases = _assemble_phrases(doc, hot_words, word_score)
    return hot_chars, hot_words, phrases


def hot_items_word(doc: Doc, scores: list[float], k: int = DEFAULT_HOT_WORDS,
                   ) -> tuple[list[int], list[HotSpan]]:
    """Word-level variant: top-k tokens by gradient score, assembled into
    phrases with the same adjacency rule."""
    if k < 1:
        raise ValueError("k must be >= 1")
    order = sorted(range(len(scores)), key=lambda i: (-scores[i], i))
    hot_words = sorted(order[:k])
    word_score = {i: scores[i] for i in hot_words}
    return hot_words, _assemble_phrases(doc, hot_words, word_score)


def hsps(handle: ClassifierHandle, doc: Doc,
         k: int | None = None) -> list[HotSpan]:
    """Hot phrases of a doc with respect to its current predicted class,
    sorted by descending score."""
    if not doc.tokens:
        return []
    cls = handle.classes[int(handle.classify(doc.text).argmax())]
    if handle.kind == "char":
        _, _, phrases = hot_items(doc, char_scores(handle, doc, cls),
                                  k=k or DEFAULT_HOT_CHARS)
    elif handle.kind == "word":
        _, phrases = hot_items_word(doc, word_scores(handle, doc, cls),
                                    k=k or DEFAULT_HOT_WORDS)
    else:
        raise ValueError("white-box saliency needs an introspectable model")
    return phrases


def sample_phrases(handle: ClassifierHandle, doc: Doc, cls: str,
                   k: int | None = None) -> list[HotSpan]:
    """Hot phrases of one sample with respect to a given class."""
    if not doc.tokens:
        return []
    if handle.kind == "char":
        _, _, phrases = hot_items(doc, char_scores(handle, doc, cls),
                                  k=k or DEFAULT_HOT_CHARS)
    else:
        _, phrases = hot_items_word(doc, word_scores(handle, doc, cls),
                                    k=k or DEFAULT_HOT_WORDS)
    return phrases


def mine_htps(handle: ClassifierHandle, docs: list[Doc],
              top_n: int = DEFAULT_TOP_PHRASES, k: int | None = None,
              phrase_dump: list | None = None) -> list[HtpEntry]:
    """Collect each training sample's hot phrases under its true label,
    count normalized phrases per class, and keep the top-N per class.

    When phrase_dump is a list, (doc id, class, phrases) triples are
    appended for every sample so an independent recount can audit the
    tables.
    """
    if not docs:
        raise ValueError("training set is empty")
    counts: dict[str, dict[str, int]] = {}
    for doc in docs:
        if doc.label is None:
            raise ValueError(f"doc {doc.id!r} has no label")
        phrases = [normalize_phrase(s.surface)
                   for s in sample_phrases(handle, doc, doc.label, k=k)]
        if phrase_dump is not None:
            phrase_dump.append((doc.id, doc.label, list(phrases)))
        per_class = counts.setdefault(doc.label, {})
        for p in phrases:
            per_class[p] = per_class.get(p, 0) + 1
    return rank_htps(counts, top_n)


def rank_htps(counts: dict[str, dict[str, int]], top_n: int) -> list[HtpEntry]:
    """Per class, rank phrases by descending frequency (ties: phrase
    order alphabetically, for determinism)."""
    entries: list[HtpEntry] = []
    for cls in sorted(counts):
        ranked = sorted(counts[cls].items(), key=lambda kv: (-kv[1], kv[0]))
        for rank, (phrase, freq) in enumerate(ranked[:top_n], 1):
            entries.append(HtpEntry(phrase=phrase, cls=cls, frequency=freq,
                                    rank=rank))
    return entries


@dataclass(frozen=True)
class FgsmResult:
    """Gradient-sign baseline on the one-hot grid, plus the variant that
    flips only the n highest-magnitude character positions."""

    epsilon: float
    grid: np.ndarray
    text: str
    original_conf: np.ndarray
    perturbed_conf: np.ndarray
    flip_n: int
    flipped_grid: np.ndarray
    flipped_text: str
    flipped_conf: np.ndarray


def fgsm_baseline(handle: ClassifierHandle, doc: Doc, epsilon: float,
                  flip_n: int = 0, cls: str | None = None) -> FgsmResult:
    """Whole-grid sign perturbation (gibberish demo) and the n-position
    flip variant. The decoded text is attached for display."""
    if handle.kind != "char":
        raise ValueError("the gradient-sign baseline needs a char-kind model")
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError("epsilon must lie in [0, 1]")
    if cls is None:
        cls = doc.label if doc.label in handle.classes else None
    if cls is None:
        cls = handle.classes[int(handle.classify(doc.text).argmax())]
    label = _class_index(handle, cls)
    grid = handle.encode(doc.text)
    original_conf = engine.forward(handle.net, grid)
    grad = engine.loss_and_gradients(handle.net, grid, label).wrt_input

    perturbed = np.clip(grid - epsilon * np.sign(grad), 0.0, 1.0)
    text = decode_chars(perturbed, handle.alphabet)
    perturbed_conf = engine.forward(handle.net, perturbed)

    flipped = grid.copy()
    if flip_n > 0:
        n = min(len(doc.text), handle.length)
        mags = np.abs(grad[:n]).max(axis=1)
        order = sorted(range(n), key=lambda i: (-mags[i], i))
        for pos in order[:flip_n]:
            flipped[pos] = 0.0
            flipped[pos, int(grad[pos].argmax())] = 1.0
    flipped_text = decode_chars(flipped, handle.alphabet)
    flipped_conf = engine.forward(handle.net, flipped)
    return FgsmResult(epsilon=epsilon, grid=perturbed, text=text,
                      original_conf=original_conf, perturbed_conf=perturbed_conf,
                      flip_n=flip_n, flipped_grid=flipped,
                      flipped_text=flipped_text, flipped_conf=flipped_conf)
