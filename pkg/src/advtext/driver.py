"""Greedy source/target attack orchestration: candidate generation via the
perturbation strategies, scoring via the classifier, hill-climbing under an
edit budget, trace recording, and campaign-level aggregate reports."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import occlusion, perturb, saliency
from .codec import Doc
from .models import ClassifierHandle
from .perturb import CandidateScore, Perturbation, PerturbLexicons
from .saliency import HtpEntry

STRATEGY_ORDER = {"insert": 0, "modify": 1, "remove": 2}
TYPO_METHODS = ("misspelling", "homoglyph")


@dataclass(frozen=True)
class AttackConfig:
    target: str
    budget: int = 5
    cap: int = 50           # candidate cap per strategy per step
    min_gain: float = 1e-4
    mode: str = "white"     # white | black
    strategies: tuple[str, ...] = ("insert", "modify", "remove")
    black_hot_words: int = 3

    def __post_init__(self):
        if self.budget < 1:
            raise ValueError("budget must be >= 1")
        if self.cap < 1:
            raise ValueError("candidate cap must be >= 1")
        if self.min_gain <= 0:
            raise ValueError("min gain must be positive")
        if self.mode not in ("white", "black"):
            raise ValueError(f"unknown knowledge mode {self.mode!r}")
        bad = set(self.strategies) - set(STRATEGY_ORDER)
        if bad:
            raise ValueError(f"unknown strategies {sorted(bad)}")


@dataclass
class AttackStep:
    perturbation: Perturbation
    conf_before: np.ndarray
    conf_after: np.ndarray
    direction: tuple[float, float] | None = None


@dataclass
class AttackTrace:
    original: Doc
    target: str
    steps: list[AttackStep]
    outcome: str   # success | budget-exhausted | no-improving-candidate
    final_text: str
    final_conf: np.ndarray
    classifier_calls: int

    def strategy_counts(self) -> dict[str, int]:
        counts = {"insert": 0, "modify": 0, "remove": 0}
        for step in self.steps:
            counts[step.perturbation.kind] += 1
        return counts


def _shift_spans(spans: list[tuple[int, int]], p: Perturbation) -> list[tuple[int, int]]:
    """Track typo-edited spans across an applied edit."""
    delta = len(p.payload) - (p.end - p.start)
    out = []
    for s, e in spans:
        if e <= p.start:
            out.append((s, e))
        elif s >= p.end:
            out.append((s + delta, e + delta))
        else:  # overlaps the edited region: widen conservatively
            out.append((min(s, p.start), max(e, p.end) + delta))
    return out


def _overlaps(spans: list[tuple[int, int]], start: int, end: int) -> bool:
    return any(s < end and start < e for s, e in spans)


def _current_hsps(handle: ClassifierHandle, doc: Doc, cfg: AttackConfig,
                  calls: list[int]) -> list[saliency.HotSpan]:
    if cfg.mode == "white":
        return saliency.hsps(handle, doc)
    calls[0] += len(doc.tokens) + 1
    return occlusion.hsps_black(handle, doc, k=cfg.black_hot_words)


def attack(handle: ClassifierHandle, doc: Doc, cfg: AttackConfig,
           htps: list[HtpEntry], lexicons: PerturbLexicons,
           snippets: list[tuple[str, int]] = ()) -> AttackTrace:
    """Greedy hill-climbing: at every step regenerate hot spans, propose
    candidates for each enabled strategy, classify every candidate text,
    and accept the one with the largest target-class gain. Ties fall to
    fewer changed characters, then insert < modify < remove, then the
    earlier anchor. Stops on success, exhausted budget, or when no
    candidate improves the target confidence by more than min_gain."""
    if cfg.target not in handle.classes:
        raise ValueError(f"unknown target class {cfg.target!r}")
    target_htps = [e for e in htps if e.cls == cfg.target]
    if "insert" in cfg.strategies and not target_htps:
        raise ValueError(f"no HTP table for class {cfg.target!r}")
    target_idx = handle.classes.index(cfg.target)

    calls = [0]
    conf = handle.classify(doc.text)
    calls[0] += 1
    current = doc
    steps: list[AttackStep] = []
    typo_spans: list[tuple[int, int]] = []
    outcome = "budget-exhausted"

    if int(conf.argmax()) == target_idx:
        return AttackTrace(original=doc, target=cfg.target, steps=[],
                           outcome="success", final_text=doc.text,
                           final_conf=conf, classifier_calls=calls[0])

    while len(steps) < cfg.budget:
        hsps = _current_hsps(handle, current, cfg, calls)
        candidates: list[CandidateScore] = []
        if "insert" in cfg.strategies:
            candidates += perturb.propose_insertions(
                current, hsps, target_htps, lexicons, m=cfg.cap, snippets=snippets)
        if "modify" in cfg.strategies:
            mods = perturb.propose_modifications(current, hsps, lexicons, m=cfg.cap)
            candidates += [c for c in mods
                           if c.perturbation.method not in TYPO_METHODS
                           or not _overlaps(typo_spans, c.perturbation.start,
                                            c.perturbation.end)]
        if "remove" in cfg.strategies:
            candidates += perturb.propose_removals(current, hsps, lexicons,
                                                   m=cfg.cap)
        if not candidates:
            outcome = "no-improving-candidate"
            break

        texts = [perturb.apply(current, c.perturbation).text for c in candidates]
        confs = handle.classify_many(texts)
        calls[0] += len(texts)
        for c, after in zip(candidates, confs):
            c.conf_before = conf
            c.conf_after = after
            c.target_gain = float(after[target_idx] - conf[target_idx])
            c.changed_chars = perturb.changed_chars(c.perturbation)

        best = min(candidates, key=lambda c: (
            -c.target_gain, c.changed_chars,
            STRATEGY_ORDER[c.perturbation.kind], c.perturbation.start))
        if best.target_gain <= cfg.min_gain:
            outcome = "no-improving-candidate"
            break

        direction = None
        if (cfg.mode == "white" and handle.kind == "char"
                and best.perturbation.kind == "modify"
                and best.perturbation.method in TYPO_METHODS):
            source_cls = handle.classes[int(conf.argmax())]
            direction = perturb.direction_check(handle, current, best.perturbation,
                                                source_cls, cfg.target)
        steps.append(AttackStep(perturbation=best.perturbation, conf_before=conf,
                                conf_after=best.conf_after, direction=direction))
        typo_spans = _shift_spans(typo_spans, best.perturbation)
        if best.perturbation.method in TYPO_METHODS:
            new_end = best.perturbation.start + len(best.perturbation.payload)
            typo_spans.append((best.perturbation.start, new_end))
        current = perturb.apply(current, best.perturbation)
        conf = best.conf_after
        if int(conf.argmax()) == target_idx:
            outcome = "success"
            break

    return AttackTrace(original=doc, target=cfg.target, steps=steps,
                       outcome=outcome, final_text=current.text,
                       final_conf=conf, classifier_calls=calls[0])


@dataclass
class CampaignRow:
    doc_id: str
    source_class: str
    target_class: str
    source_conf: float   # original confidence of the predicted class
    target_conf: float   # final confidence of the target class
    inserted: int
    modified: int
    removed: int
    outcome: str
    classifier_calls: int


@dataclass
class CampaignReport:
    rows: list[CampaignRow]
    success_rate: float | None   # None when there were no attacks
    avg_inserted: float | None
    avg_modified: float | None
    avg_removed: float | None

    @classmethod
    def from_rows(cls, rows: list[CampaignRow]) -> "CampaignReport":
        if not rows:
            return cls(rows=[], success_rate=None, avg_inserted=None,
                       avg_modified=None, avg_removed=None)
        n = len(rows)
        return cls(
            rows=rows,
            success_rate=sum(r.outcome == "success" for r in rows) / n,
            avg_inserted=sum(r.inserted for r in rows) / n,
            avg_modified=sum(r.modified for r in rows) / n,
            avg_removed=sum(r.removed for r in rows) / n,
        )

    def to_csv_rows(self) -> list[list[str]]:
        header = ["doc_id", "source_class", "target_class", "source_conf",
                  "target_conf", "inserted_htps", "modified_hsps",
                  "removed_hsps", "outcome", "classifier_calls"]
        body = [[r.doc_id, r.source_class, r.target_class,
                 repr(r.source_conf), repr(r.target_conf), str(r.inserted),
                 str(r.modified), str(r.removed), r.outcome,
                 str(r.classifier_calls)] for r in self.rows]
        return [header] + body

    def format_table(self) -> str:
        lines = [f"{'No.':>4}  {'Source':<18} {'Target':<18} "
                 f"{'Ins':>3} {'Mod':>3} {'Rem':>3}  Outcome"]
        for i, r in enumerate(self.rows, 1):
            lines.append(
                f"{i:>4}  {r.source_class + f' ({r.source_conf:.1%})':<18} "
                f"{r.target_class + f' ({r.target_conf:.1%})':<18} "
                f"{r.inserted:>3} {r.modified:>3} {r.removed:>3}  {r.outcome}")
        if self.success_rate is None:
            lines.append("Avg.  (no attacks run: success rate undefined)")
        else:
            lines.append(
                f"Avg.  success {self.success_rate:.1%}  "
                f"{self.avg_inserted:.1f} {self.avg_modified:.1f} "
                f"{self.avg_removed:.1f}")
        return "\n".join(lines)


def run_campaign(handle: ClassifierHandle, docs: list[Doc],
                 pairs: list[tuple[str, str]], cfg: AttackConfig,
                 htps: list[HtpEntry], lexicons: PerturbLexicons,
                 per_pair: int = 20) -> CampaignReport:
    """One attack per (doc, target) pair: for each requested
    source -> target pair, up to per_pair docs labeled with the source
    class are each driven toward the target."""
    labels = {d.label for d in docs}
    for source, target in pairs:
        if source not in labels:
            raise ValueError(f"no docs with source class {source!r}")
    rows: list[CampaignRow] = []
    for source, target in pairs:
        chosen = [d for d in docs if d.label == source][:per_pair]
        for doc in chosen:
            trace = attack(handle, doc, replace(cfg, target=target),
                           htps, lexicons)
            counts = trace.strategy_counts()
            orig_conf = trace.steps[0].conf_before if trace.steps \
                else trace.final_conf
            rows.append(CampaignRow(
                doc_id=doc.id, source_class=source, target_class=target,
                source_conf=float(np.asarray(orig_conf).max()),
                target_conf=float(trace.final_conf[handle.classes.index(target)]),
                inserted=counts["insert"], modified=counts["modify"],
                removed=counts["remove"], outcome=trace.outcome,
                classifier_calls=trace.classifier_calls))
    return CampaignReport.from_rows(rows)


def all_ordered_pairs(classes: list[str]) -> list[tuple[str, str]]:
    return [(s, t) for s in classes for t in classes if s != t]


def overlap_study(white: list[HtpEntry], black: list[HtpEntry],
                  top_n: int = 10) -> dict[str, int]:
    """Per class, how many of the top-N white-box table phrases also sit
    in the top-N black-box table (after normalization)."""
    white_classes = {e.cls for e in white}
    black_classes = {e.cls for e in black}
    if white_classes != black_classes:
        raise ValueError(f"class mismatch: white {sorted(white_classes)} "
                         f"vs black {sorted(black_classes)}")
    out: dict[str, int] = {}
    for cls in sorted(white_classes):
        w = {saliency.normalize_phrase(e.phrase) for e in white
             if e.cls == cls and e.rank <= top_n}
        b = {saliency.normalize_phrase(e.phrase) for e in black
             if e.cls == cls and e.rank <= top_n}
        out[cls] = len(w & b)
    return out
