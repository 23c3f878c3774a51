"""Attack driver tests: greedy selection against an exhaustive per-step
rescan oracle, budget and chaining invariants, the per-word typo budget,
and campaign/overlap reporting."""

import numpy as np
import pytest

from advtext import driver, perturb, saliency
from advtext.codec import Doc
from advtext.driver import AttackConfig, CampaignReport, attack, overlap_study, run_campaign
from advtext.perturb import PerturbLexicons
from advtext.saliency import HtpEntry


def htp_table(cls, phrases):
    return [HtpEntry(phrase=p, cls=cls, frequency=100 - i, rank=i + 1)
            for i, p in enumerate(phrases)]


@pytest.fixture
def lexicons():
    return PerturbLexicons(
        misspellings={"striker": ["stricker"], "trophy": ["trophey"]},
        homoglyphs={"o": "0", "l": "1"},
        paraphrases={},
        dispensable={"very", "quiet"},
        templates=["( <htp> )"],
    )


class WordCountModel:
    """Transparent stand-in classifier: probability mass follows keyword
    counts, so greedy behavior is fully predictable."""

    def __init__(self, keywords):  # keywords: class -> word
        self.classes = list(keywords)
        self.keywords = keywords
        self.calls = 0

    def classify(self, text):
        self.calls += 1
        words = text.lower().split()
        counts = np.array([1.0 + 3.0 * words.count(self.keywords[c])
                           for c in self.classes])
        return counts / counts.sum()

    def classify_many(self, texts):
        return np.stack([self.classify(t) for t in texts]) if texts else \
            np.zeros((0, len(self.classes)))


class ConstantModel:
    def __init__(self, probs, classes=("A", "B")):
        self.probs = np.asarray(probs, dtype=np.float64)
        self.classes = list(classes)

    def classify(self, text):
        return self.probs

    def classify_many(self, texts):
        return np.stack([self.probs] * len(texts)) if texts else \
            np.zeros((0, len(self.classes)))


class TestAttackConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            AttackConfig(target="x", budget=0)
        with pytest.raises(ValueError):
            AttackConfig(target="x", min_gain=0.0)
        with pytest.raises(ValueError):
            AttackConfig(target="x", mode="grey")
        with pytest.raises(ValueError):
            AttackConfig(target="x", strategies=("insert", "mutate"))


class TestAttackBasics:
    def test_already_target_is_zero_step_success(self, lexicons):
        model = ConstantModel([0.2, 0.8])
        cfg = AttackConfig(target="B", mode="black")
        trace = attack(model, Doc.make("whatever text"), cfg,
                       htp_table("B", ["word"]), lexicons)
        assert trace.outcome == "success"
        assert trace.steps == []
        assert trace.final_text == "whatever text"

    def test_constant_model_stops_with_no_improving_candidate(self, lexicons):
        model = ConstantModel([0.9, 0.1])
        cfg = AttackConfig(target="B", mode="black")
        trace = attack(model, Doc.make("some words here"), cfg,
                       htp_table("B", ["word"]), lexicons)
        assert trace.outcome == "no-improving-candidate"
        assert trace.steps == []

    def test_missing_htp_table_names_class(self, lexicons):
        model = ConstantModel([0.9, 0.1])
        cfg = AttackConfig(target="B", mode="black")
        with pytest.raises(ValueError, match="'B'"):
            attack(model, Doc.make("text"), cfg, htp_table("A", ["x"]), lexicons)

    def test_unknown_target_rejected(self, lexicons):
        model = ConstantModel([0.9, 0.1])
        with pytest.raises(ValueError, match="target"):
            attack(model, Doc.make("text"), AttackConfig(target="Z"),
                   [], lexicons)

    def test_budget_respected_and_chaining_holds(self, lexicons):
        model = WordCountModel({"A": "apple", "B": "berry"})
        doc = Doc.make("apple apple apple apple apple apple apple apple")
        cfg = AttackConfig(target="B", budget=3, mode="black", min_gain=1e-6)
        trace = attack(model, doc, cfg, htp_table("B", ["berry"]), lexicons)
        assert len(trace.steps) <= 3
        for a, b in zip(trace.steps, trace.steps[1:]):
            assert a.conf_after.tobytes() == b.conf_before.tobytes()

    def test_gain_strictly_above_min_gain_each_step(self, lexicons):
        model = WordCountModel({"A": "apple", "B": "berry"})
        doc = Doc.make("apple apple apple apple")
        cfg = AttackConfig(target="B", budget=5, mode="black", min_gain=1e-6)
        trace = attack(model, doc, cfg, htp_table("B", ["berry"]), lexicons)
        assert trace.outcome == "success"
        for step in trace.steps:
            gain = step.conf_after[1] - step.conf_before[1]
            assert gain > cfg.min_gain

    def test_deterministic_traces(self, lexicons):
        model = WordCountModel({"A": "apple", "B": "berry"})
        doc = Doc.make("apple pie with apple sauce and more apple")
        cfg = AttackConfig(target="B", budget=4, mode="black")
        t1 = attack(model, doc, cfg, htp_table("B", ["berry", "juice"]), lexicons)
        t2 = attack(model, doc, cfg, htp_table("B", ["berry", "juice"]), lexicons)
        assert t1.final_text == t2.final_text
        assert [s.perturbation for s in t1.steps] == \
            [s.perturbation for s in t2.steps]

    def test_success_sets_argmax_to_target(self, lexicons):
        model = WordCountModel({"A": "apple", "B": "berry"})
        doc = Doc.make("apple apple")
        cfg = AttackConfig(target="B", budget=5, mode="black")
        trace = attack(model, doc, cfg, htp_table("B", ["berry"]), lexicons)
        assert trace.outcome == "success"
        assert model.classes[int(trace.final_conf.argmax())] == "B"


class TestGreedySelectionOracle:
    def test_each_step_matches_exhaustive_rescan(self, char_model, topic_htps,
                                                 lexicons_shipped, topic_corpus):
        _, test = topic_corpus
        doc = [d for d in test if d.label == "Sport"][0]
        cfg = AttackConfig(target="Kitchen", budget=3, mode="white")
        trace = attack(char_model, doc, cfg, topic_htps, lexicons_shipped)
        target_idx = char_model.classes.index("Kitchen")
        current = doc
        table = [e for e in topic_htps if e.cls == "Kitchen"]
        for step in trace.steps:
            hsps = saliency.hsps(char_model, current)
            pool = (perturb.propose_insertions(current, hsps, table,
                                               lexicons_shipped, m=cfg.cap)
                    + perturb.propose_modifications(current, hsps,
                                                    lexicons_shipped, m=cfg.cap)
                    + perturb.propose_removals(current, hsps, lexicons_shipped,
                                               m=cfg.cap))
            conf_before = char_model.classify(current.text)
            best_key = None
            for c in pool:
                text = perturb.apply(current, c.perturbation).text
                conf = char_model.classify_many([text])[0]
                gain = float(conf[target_idx] - conf_before[target_idx])
                key = (-gain, perturb.changed_chars(c.perturbation),
                       driver.STRATEGY_ORDER[c.perturbation.kind],
                       c.perturbation.start)
                if best_key is None or key < best_key:
                    best_key = key
                    best = c.perturbation
            assert step.perturbation == best
            current = perturb.apply(current, step.perturbation)

    @pytest.fixture
    def lexicons_shipped(self, lexicons):
        from advtext import store
        return store.load_lexicons()


class TestTypoBudget:
    def test_no_word_gets_two_typo_edits(self, lexicons):
        # model that rewards every typo on "apple": berry mass rises with
        # each edit distance from clean text
        class TypoLover:
            classes = ["A", "B"]

            def classify(self, text):
                words = text.lower().split()
                dirty = sum(w not in ("apple", "berry") for w in words)
                b = min(0.05 + 0.1 * dirty, 0.45)
                return np.array([1 - b, b])

            def classify_many(self, texts):
                return np.stack([self.classify(t) for t in texts])

        lex = PerturbLexicons(
            misspellings={"apple": ["aple", "appel"]},
            homoglyphs={"l": "1", "o": "0"},
            dispensable=set(), paraphrases={}, templates=[])
        doc = Doc.make("apple apple apple")
        cfg = AttackConfig(target="B", budget=5, mode="black",
                           strategies=("modify",), min_gain=1e-6)
        trace = attack(TypoLover(), doc, cfg, [], lex)
        # replay: spans edited by typo methods must never overlap
        spans = []
        for step in trace.steps:
            p = step.perturbation
            for s, e in spans:
                assert not (s < p.end and p.start < e)
            delta = len(p.payload) - (p.end - p.start)
            spans = [(s if e <= p.start else s + delta,
                      e if e <= p.start else e + delta) for s, e in spans]
            spans.append((p.start, p.start + len(p.payload)))


class TestCampaign:
    def test_empty_rows_report_undefined_rate(self):
        report = CampaignReport.from_rows([])
        assert report.success_rate is None
        assert "undefined" in report.format_table()

    def test_averages_match_rows(self, lexicons):
        model = WordCountModel({"A": "apple", "B": "berry"})
        docs = [Doc.make("apple apple", id=str(i), label="A") for i in range(3)]
        report = run_campaign(model, docs, [("A", "B")],
                              AttackConfig(target="B", mode="black"),
                              htp_table("B", ["berry"]), lexicons, per_pair=2)
        assert len(report.rows) == 2
        n = len(report.rows)
        assert report.success_rate == pytest.approx(
            sum(r.outcome == "success" for r in report.rows) / n)
        assert report.avg_inserted == pytest.approx(
            sum(r.inserted for r in report.rows) / n)

    def test_missing_source_class_rejected(self, lexicons):
        model = WordCountModel({"A": "apple", "B": "berry"})
        with pytest.raises(ValueError, match="source"):
            run_campaign(model, [], [("A", "B")], AttackConfig(target="B"),
                         htp_table("B", ["berry"]), lexicons)

    def test_csv_rows_shape(self, lexicons):
        model = WordCountModel({"A": "apple", "B": "berry"})
        docs = [Doc.make("apple apple", id="1", label="A")]
        report = run_campaign(model, docs, [("A", "B")],
                              AttackConfig(target="B", mode="black"),
                              htp_table("B", ["berry"]), lexicons)
        rows = report.to_csv_rows()
        assert rows[0][:3] == ["doc_id", "source_class", "target_class"]
        assert len(rows) == 2 and len(rows[1]) == len(rows[0])


class TestOverlap:
    def test_identical_tables_give_full_overlap(self):
        table = htp_table("Pos", ["great", "fine", "good"])
        assert overlap_study(table, list(table), top_n=3) == {"Pos": 3}

    def test_partial_overlap_counted_after_normalization(self):
        white = htp_table("Pos", ["Great", "fine", "nice"])
        black = htp_table("Pos", ["great", "good", "NICE"])
        assert overlap_study(white, black, top_n=3) == {"Pos": 2}

    def test_class_mismatch_rejected(self):
        with pytest.raises(ValueError, match="mismatch"):
            overlap_study(htp_table("Pos", ["x"]), htp_table("Neg", ["x"]))

    def test_top_n_limits_window(self):
        white = htp_table("Pos", ["a", "b", "c", "d"])
        black = htp_table("Pos", ["d", "c", "b", "a"])
        assert overlap_study(white, black, top_n=2) == {"Pos": 0}
        assert overlap_study(white, black, top_n=4) == {"Pos": 4}


class TestBlackModeOnDeskModel:
    def test_occlusion_guided_attacks_succeed(self, char_model, topic_htps,
                                              topic_corpus):
        from advtext import store
        _, test = topic_corpus
        lexicons = store.load_lexicons()
        outcomes = []
        for doc, target in [(next(d for d in test if d.label == "Sport"),
                             "Kitchen"),
                            (next(d for d in test if d.label == "Weather"),
                             "Finance"),
                            (next(d for d in test if d.label == "Kitchen"),
                             "Sport")]:
            cfg = AttackConfig(target=target, budget=5, mode="black")
            trace = attack(char_model, doc, cfg, topic_htps, lexicons)
            outcomes.append(trace.outcome)
            # every step paid for its probes: more calls than white mode needs
            assert trace.classifier_calls > len(doc.tokens)
            for step in trace.steps:
                gain = (step.conf_after[char_model.classes.index(target)]
                        - step.conf_before[char_model.classes.index(target)])
                assert gain > cfg.min_gain
        assert outcomes.count("success") >= 2

    def test_black_and_white_reach_the_same_target(self, char_model,
                                                   topic_htps, topic_corpus):
        from advtext import store
        _, test = topic_corpus
        doc = next(d for d in test if d.label == "Finance")
        lexicons = store.load_lexicons()
        for mode in ("white", "black"):
            cfg = AttackConfig(target="Weather", budget=5, mode=mode)
            trace = attack(char_model, doc, cfg, topic_htps, lexicons)
            assert trace.outcome == "success", f"{mode} attack failed"


class TestBlackModeAccounting:
    def test_oracle_call_count_reported(self, lexicons):
        model = WordCountModel({"A": "apple", "B": "berry"})
        doc = Doc.make("apple apple apple")
        cfg = AttackConfig(target="B", budget=1, mode="black", cap=5)
        model.calls = 0
        trace = attack(model, doc, cfg, htp_table("B", ["berry"]), lexicons)
        assert trace.classifier_calls == model.calls
        assert trace.classifier_calls > len(doc.tokens)
