"""The three perturbation strategies (insertion, modification, removal),
gradient-direction validation for modifications, and exact perturbation
application/reversal on Docs.

Every perturbation is stored as a uniform char-span edit: replace
text[start:end) (the recorded original substring) with a payload string.
Insertions have start == end and an empty original; removals have an
empty payload. That makes apply/revert an exact inverse and makes stale
anchors detectable by comparing the recorded original against the doc.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import engine
from .codec import Doc
from .models import ClassifierHandle
from .saliency import HotSpan, HtpEntry

INSERT, MODIFY, REMOVE = "insert", "modify", "remove"


class StaleAnchorError(ValueError):
    """The doc changed since the perturbation was proposed."""


@dataclass(frozen=True)
class Perturbation:
    kind: str            # insert | modify | remove
    start: int           # char offset of the edited span
    end: int             # char offset past the span (== start for inserts)
    original: str        # exact replaced substring ("" for inserts)
    payload: str         # exact inserted/replacement text ("" for removals)
    method: str          # htp-token | parenthetical | user-snippet |
                         # misspelling | homoglyph | paraphrase | dispensable-removal
    provenance: str = ""  # which HTP/HSP/lexicon entry produced it
    token_start: int = -1  # token range for modify/remove anchors
    token_end: int = -1

    def __post_init__(self):
        if self.kind == INSERT and not self.payload:
            raise ValueError("insert payload must be nonempty")
        if self.kind == MODIFY and self.payload == self.original:
            raise ValueError("modify payload must differ from the original span")


@dataclass
class CandidateScore:
    perturbation: Perturbation
    conf_before: np.ndarray | None = None
    conf_after: np.ndarray | None = None
    target_gain: float = 0.0
    direction: tuple[float, float] | None = None  # (source dot, target dot)
    changed_chars: int = 0


@dataclass
class PerturbLexicons:
    misspellings: dict[str, list[str]] = field(default_factory=dict)
    homoglyphs: dict[str, str] = field(default_factory=dict)
    paraphrases: dict[str, str] = field(default_factory=dict)
    dispensable: set[str] = field(default_factory=set)
    templates: list[str] = field(default_factory=list)
    template_year: str = "1996"

    def __post_init__(self):
        for a, b in self.homoglyphs.items():
            if len(a) != 1 or len(b) != 1 or a == b:
                raise ValueError(f"homoglyph pair {a!r}->{b!r} must be two "
                                 "distinct single characters")
        for t in self.templates:
            if "<htp>" not in t:
                raise ValueError(f"template {t!r} has no <htp> slot")


def apply(doc: Doc, p: Perturbation) -> Doc:
    """Edit the text exactly at the anchor and re-derive tokens."""
    if not (0 <= p.start <= p.end <= len(doc.text)):
        raise StaleAnchorError(f"anchor [{p.start}, {p.end}) outside text")
    if doc.text[p.start:p.end] != p.original:
        raise StaleAnchorError(
            f"anchor mismatch: expected {p.original!r}, "
            f"found {doc.text[p.start:p.end]!r}")
    return doc.with_text(doc.text[:p.start] + p.payload + doc.text[p.end:])


def revert(doc: Doc, p: Perturbation) -> Doc:
    """Exact inverse of apply."""
    end = p.start + len(p.payload)
    if doc.text[p.start:end] != p.payload:
        raise StaleAnchorError(
            f"cannot revert: expected {p.payload!r}, found {doc.text[p.start:end]!r}")
    return doc.with_text(doc.text[:p.start] + p.original + doc.text[end:])


def _insert_at(doc: Doc, offset: int, payload: str, method: str,
               provenance: str) -> Perturbation:
    """Insertion with single-space delimiting from both neighbors."""
    text = doc.text
    before = text[offset - 1] if offset > 0 else ""
    after = text[offset] if offset < len(text) else ""
    body = payload
    if before and not before.isspace():
        body = " " + body
    if after and not after.isspace():
        body = body + " "
    return Perturbation(kind=INSERT, start=offset, end=offset, original="",
                        payload=body, method=method, provenance=provenance)


def _hsp_anchors(doc: Doc, hsps: list[HotSpan]) -> list[tuple[int, str]]:
    """(offset, hsp label) insertion anchors: before and after each hot
    phrase; text start and end as fallback when there are none."""
    anchors = []
    for s in hsps:
        start = doc.tokens[s.start].char_start
        end = doc.tokens[s.end - 1].char_end
        anchors.append((start, f"before:{s.surface}"))
        anchors.append((end, f"after:{s.surface}"))
    if not anchors:
        anchors = [(0, "text-start"), (len(doc.text), "text-end")]
    return anchors


def fill_template(template: str, htps: list[str], year: str) -> str:
    """Fill <htp> slots with top table phrases in rank order and <year>
    with the configured year."""
    out = template
    i = 0
    while "<htp>" in out:
        out = out.replace("<htp>", htps[i % len(htps)], 1)
        i += 1
    return out.replace("<year>", year)


def propose_insertions(doc: Doc, hsps: list[HotSpan], htps: list[HtpEntry],
                       lexicons: PerturbLexicons, m: int = 50,
                       snippets: list[tuple[str, int]] = ()) -> list[CandidateScore]:
    """Single HTP tokens at hot-phrase boundaries, parenthetical templates
    holding the top HTPs after each hot phrase, and user snippets at their
    chosen offsets. Capped at m; unscored (the driver scores)."""
    if not htps:
        raise ValueError("no hot training phrases for the target class")
    anchors = _hsp_anchors(doc, hsps)
    singles = [_insert_at(doc, offset, entry.phrase, "htp-token",
                          f"htp#{entry.rank}:{entry.phrase}@{where}")
               for entry in sorted(htps, key=lambda e: e.rank)
               for offset, where in anchors]
    top_phrases = [e.phrase for e in sorted(htps, key=lambda e: e.rank)[:3]]
    parens = []
    for s in hsps:
        end = doc.tokens[s.end - 1].char_end
        for template in lexicons.templates:
            body = fill_template(template, top_phrases, lexicons.template_year)
            parens.append(_insert_at(doc, end, body, "parenthetical",
                                     f"template:{template!r}@after:{s.surface}"))
    user = [_insert_at(doc, offset, text, "user-snippet", "user")
            for text, offset in snippets]
    # round-robin across the three groups so the cap keeps some of each
    out: list[CandidateScore] = []
    groups = [singles, parens, user]
    cursors = [0, 0, 0]
    while len(out) < m and any(c < len(g) for c, g in zip(cursors, groups)):
        for gi, group in enumerate(groups):
            if cursors[gi] < len(group) and len(out) < m:
                out.append(CandidateScore(perturbation=group[cursors[gi]]))
                cursors[gi] += 1
    return out


def _single_homoglyph_variants(word: str, mapping: dict[str, str]) -> list[str]:
    variants = []
    for i, ch in enumerate(word):
        if ch in mapping:
            variants.append(word[:i] + mapping[ch] + word[i + 1:])
    return variants


def propose_modifications(doc: Doc, hsps: list[HotSpan],
                          lexicons: PerturbLexicons, m: int = 50,
                          ) -> list[CandidateScore]:
    """Per hot-phrase word: its corpus misspellings and its one-character
    homoglyph variants (never more than one substituted character per
    word); per hot phrase: its paraphrase-table replacement."""
    out: list[CandidateScore] = []
    seen_tokens: set[int] = set()
    for span in hsps:
        phrase_norm = " ".join(span.surface.lower().split())
        if phrase_norm in lexicons.paraphrases and len(out) < m:
            start = doc.tokens[span.start].char_start
            end = doc.tokens[span.end - 1].char_end
            replacement = lexicons.paraphrases[phrase_norm]
            if replacement != doc.text[start:end]:
                out.append(CandidateScore(perturbation=Perturbation(
                    kind=MODIFY, start=start, end=end,
                    original=doc.text[start:end], payload=replacement,
                    method="paraphrase", provenance=f"paraphrase:{phrase_norm}",
                    token_start=span.start, token_end=span.end)))
        for ti in range(span.start, span.end):
            if ti in seen_tokens:
                continue
            seen_tokens.add(ti)
            tok = doc.tokens[ti]
            for miss in lexicons.misspellings.get(tok.word.lower(), []):
                if len(out) >= m or miss == tok.word:
                    continue
                out.append(CandidateScore(perturbation=Perturbation(
                    kind=MODIFY, start=tok.char_start, end=tok.char_end,
                    original=tok.word, payload=miss, method="misspelling",
                    provenance=f"misspelling:{tok.word}->{miss}",
                    token_start=ti, token_end=ti + 1)))
            for variant in _single_homoglyph_variants(tok.word, lexicons.homoglyphs):
                if len(out) >= m:
                    continue
                out.append(CandidateScore(perturbation=Perturbation(
                    kind=MODIFY, start=tok.char_start, end=tok.char_end,
                    original=tok.word, payload=variant, method="homoglyph",
                    provenance=f"homoglyph:{tok.word}->{variant}",
                    token_start=ti, token_end=ti + 1)))
    return out[:m]


def propose_removals(doc: Doc, hsps: list[HotSpan], lexicons: PerturbLexicons,
                     m: int = 50) -> list[CandidateScore]:
    """One candidate per hot-phrase member word found in the dispensable
    lexicon; removal deletes the word plus one adjacent space."""
    out: list[CandidateScore] = []
    seen_tokens: set[int] = set()
    for span in hsps:
        for ti in range(span.start, span.end):
            if ti in seen_tokens or len(out) >= m:
                continue
            seen_tokens.add(ti)
            tok = doc.tokens[ti]
            if tok.word.lower() not in lexicons.dispensable:
                continue
            start, end = tok.char_start, tok.char_end
            if end < len(doc.text) and doc.text[end] == " ":
                end += 1
            elif start > 0 and doc.text[start - 1] == " ":
                start -= 1
            out.append(CandidateScore(perturbation=Perturbation(
                kind=REMOVE, start=start, end=end,
                original=doc.text[start:end], payload="",
                method="dispensable-removal", provenance=f"dispensable:{tok.word}",
                token_start=ti, token_end=ti + 1)))
    return out[:m]


def direction_check(handle: ClassifierHandle, doc: Doc, p: Perturbation,
                    source_cls: str, target_cls: str) -> tuple[float, float]:
    """Dot products of the encoding change against the source- and
    target-class cost gradients, summed explicitly over the grid cells the
    modification actually changes. The desirable direction is a positive
    first component (source cost rises) and a negative second (target
    cost falls)."""
    if p.kind != MODIFY:
        raise ValueError("direction_check applies to modifications")
    if handle.kind != "char":
        raise ValueError("direction_check needs a char-kind model")
    before = handle.encode(doc.text)
    after = handle.encode(apply(doc, p).text)
    delta = after - before
    rows, cols = np.nonzero(delta)
    src = _class_idx(handle, source_cls)
    tgt = _class_idx(handle, target_cls)
    grad_src = engine.loss_and_gradients(handle.net, before, src).wrt_input
    grad_tgt = engine.loss_and_gradients(handle.net, before, tgt).wrt_input
    d_src = 0.0
    d_tgt = 0.0
    for r, c in zip(rows, cols):
        d_src += grad_src[r, c] * delta[r, c]
        d_tgt += grad_tgt[r, c] * delta[r, c]
    return float(d_src), float(d_tgt)


def _class_idx(handle: ClassifierHandle, cls: str) -> int:
    try:
        return handle.classes.index(cls)
    except ValueError:
        raise ValueError(f"unknown class {cls!r}") from None


def levenshtein(a: str, b: str) -> int:
    """Plain single-character edit distance (insert/delete/substitute)."""
    if a == b:
        return 0
    if not a:
        return len(b)
    if not b:
        return len(a)
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1,
                           prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def changed_chars(p: Perturbation) -> int:
    """Edit magnitude of one perturbation, used for tie-breaking."""
    return levenshtein(p.original, p.payload)
