"""Black-box probing: occlude words one at a time with equal-length runs
of spaces, measure per-class confidence deviations against the seed, and
mine hot phrases/tables using nothing but the classify interface."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .codec import Doc
from .saliency import HotSpan, HtpEntry, normalize_phrase, rank_htps

DEFAULT_BLACK_HOT_WORDS = 3


@dataclass(frozen=True)
class Probe:
    seed_id: str
    token_index: int
    text: str


@dataclass(frozen=True)
class DeviationTable:
    """Seed confidence plus, per token, how much the seed's predicted-class
    confidence drops when that token is occluded (signed; a probe that
    raises the confidence yields a negative deviation)."""

    seed_conf: np.ndarray
    predicted_class: int
    deviations: tuple[float, ...]


def gen_probes(doc: Doc) -> list[Probe]:
    """One probe per token, in token order; each probe text has the same
    length as the seed and differs only inside the occluded token span."""
    probes = []
    for i, tok in enumerate(doc.tokens):
        occluded = (doc.text[:tok.char_start]
                    + " " * (tok.char_end - tok.char_start)
                    + doc.text[tok.char_end:])
        probes.append(Probe(seed_id=doc.id, token_index=i, text=occluded))
    return probes


def deviations(handle, doc: Doc, jobs: int = 1) -> DeviationTable:
    """Classify the seed once and every probe once; deviations are ordered
    by token. ``handle`` is anything with classify/classify_many.

    jobs > 1 probes concurrently (results are keyed by token index, so the
    table is identical to the sequential one); it also acts as the
    max-in-flight cap toward external oracles.
    """
    seed_conf = handle.classify(doc.text)
    pred = int(np.asarray(seed_conf).argmax())
    probes = gen_probes(doc)
    if not probes:
        return DeviationTable(seed_conf=np.asarray(seed_conf), predicted_class=pred,
                              deviations=())
    texts = [p.text for p in probes]
    # one classify per probe, keyed by token index: the table is bit-identical
    # no matter the evaluation order or degree of parallelism
    try:
        if jobs > 1:
            probe_confs = [None] * len(texts)
            with ThreadPoolExecutor(max_workers=jobs) as pool:
                futures = {pool.submit(handle.classify, t): i
                           for i, t in enumerate(texts)}
                for fut in futures:
                    probe_confs[futures[fut]] = fut.result()
        else:
            probe_confs = [handle.classify(t) for t in texts]
    except Exception as e:
        # locate which token's probe broke the oracle so the caller can act
        for i, text in enumerate(texts):
            try:
                handle.classify(text)
            except Exception:
                raise RuntimeError(f"probe for token {i} failed: {e}") from e
        raise RuntimeError(f"probe classification failed: {e}") from e
    devs = tuple(float(seed_conf[pred] - row[pred]) for row in probe_confs)
    return DeviationTable(seed_conf=np.asarray(seed_conf), predicted_class=pred,
                          deviations=devs)


def hsps_black(handle, doc: Doc, k: int = DEFAULT_BLACK_HOT_WORDS,
               table: DeviationTable | None = None) -> list[HotSpan]:
    """Top-k tokens by deviation (ties: earlier token), adjacent selections
    merged into phrase spans, sorted by descending span score."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if not doc.tokens:
        return []
    if table is None:
        table = deviations(handle, doc)
    devs = table.deviations
    order = sorted(range(len(devs)), key=lambda i: (-devs[i], i))
    chosen = sorted(order[:k])
    spans: list[HotSpan] = []
    i = 0
    while i < len(chosen):
        j = i
        while j + 1 < len(chosen) and chosen[j + 1] == chosen[j] + 1:
            j += 1
        start, end = chosen[i], chosen[j] + 1
        surface = doc.text[doc.tokens[start].char_start:doc.tokens[end - 1].char_end]
        score = sum(devs[t] for t in chosen[i:j + 1])
        spans.append(HotSpan(start=start, end=end, surface=surface, score=score,
                             kind="phrase"))
        i = j + 1
    spans.sort(key=lambda s: (-s.score, s.start))
    return spans


def mine_htps_black(handle, docs: list[Doc], top_n: int = 10,
                    word_dump: list | None = None) -> list[HtpEntry]:
    """Per sample, count only the single word whose occlusion causes the
    largest deviation, toward the sample's label class."""
    if not docs:
        raise ValueError("training set is empty")
    counts: dict[str, dict[str, int]] = {}
    for doc in docs:
        if doc.label is None:
            raise ValueError(f"doc {doc.id!r} has no label")
        if not doc.tokens:
            continue
        table = deviations(handle, doc)
        devs = table.deviations
        best = min(range(len(devs)), key=lambda i: (-devs[i], i))
        word = normalize_phrase(doc.tokens[best].word)
        if word_dump is not None:
            word_dump.append((doc.id, doc.label, word))
        per_class = counts.setdefault(doc.label, {})
        per_class[word] = per_class.get(word, 0) + 1
    return rank_htps(counts, top_n)


def dump_probes(doc: Doc, path) -> None:
    """One probe text per line, prefixed by its token index, for audit."""
    with open(path, "w", encoding="utf-8") as f:
        for p in gen_probes(doc):
            f.write(f"{p.token_index}\t{p.text}\n")
