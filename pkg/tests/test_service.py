"""HTTP service tests over a real listening server: endpoint/library
parity, session lifecycle with suggest/apply/undo, stale-candidate
detection, and session isolation."""

import json
import threading
import urllib.error
import urllib.request

import numpy as np
import pytest

import advtext as at
from advtext import models, occlusion, saliency, service, store
from advtext.codec import Doc, Vocabulary


@pytest.fixture(scope="module")
def senti_model():
    train, _ = at.make_sentiment_corpus(train_per_class=60, test_per_class=5)
    vocab = Vocabulary.from_docs(train, dim=16, seed=5)
    handle = at.build_word_cnn(at.toydata.SENTIMENT_CLASSES, vocab, length=32,
                               seed=42, model_id="senti")
    models.train_classifier(handle, train, at.TrainConfig(
        epochs=8, learning_rate=0.15, batch_size=32, seed=42))
    return handle


@pytest.fixture(scope="module")
def senti_htps(senti_model):
    train, _ = at.make_sentiment_corpus(train_per_class=60, test_per_class=5)
    return saliency.mine_htps(senti_model, train)


@pytest.fixture(scope="module")
def server(senti_model, senti_htps):
    api = service.WorkbenchApi({"senti": senti_model}, {"senti": senti_htps},
                               store.load_lexicons())
    httpd = service.make_server(api, port=0)
    port = httpd.server_address[1]
    thread = threading.Thread(target=httpd.serve_forever, daemon=True)
    thread.start()
    # register an external-oracle model that loops back through HTTP
    api.models["ext"] = models.external_classifier(
        senti_model.classes,
        f"http://127.0.0.1:{port}/models/senti/classify", model_id="ext")
    yield f"http://127.0.0.1:{port}", api
    httpd.shutdown()


def call(base, method, path, body=None):
    req = urllib.request.Request(
        base + path,
        data=json.dumps(body).encode("utf-8") if body is not None else None,
        headers={"Content-Type": "application/json"}, method=method)
    try:
        with urllib.request.urlopen(req, timeout=30) as resp:
            return resp.status, json.loads(resp.read().decode("utf-8"))
    except urllib.error.HTTPError as e:
        return e.code, json.loads(e.read().decode("utf-8"))


SAMPLE = "the movie was great and the plot seemed rather lovely to me ."


class TestClassifyEndpoint:
    def test_parity_with_library(self, server, senti_model):
        base, _ = server
        status, reply = call(base, "POST", "/models/senti/classify",
                             {"text": SAMPLE})
        assert status == 200
        assert reply["classes"] == senti_model.classes
        want = senti_model.classify(SAMPLE)
        assert reply["probs"] == [float(x) for x in want]

    def test_probs_sum_to_one(self, server):
        base, _ = server
        _, reply = call(base, "POST", "/models/senti/classify",
                        {"text": "anything"})
        assert abs(sum(reply["probs"]) - 1.0) < 1e-9

    def test_repeated_request_identical(self, server):
        base, _ = server
        _, a = call(base, "POST", "/models/senti/classify", {"text": SAMPLE})
        _, b = call(base, "POST", "/models/senti/classify", {"text": SAMPLE})
        assert a == b

    def test_unknown_model_404(self, server):
        base, _ = server
        status, reply = call(base, "POST", "/models/nope/classify",
                             {"text": "x"})
        assert status == 404

    def test_malformed_body_400(self, server):
        base, _ = server
        status, _ = call(base, "POST", "/models/senti/classify", {"no": "text"})
        assert status == 400

    def test_external_loopback_model_classifies(self, server, senti_model):
        base, _ = server
        status, reply = call(base, "POST", "/models/ext/classify",
                             {"text": SAMPLE})
        assert status == 200
        np.testing.assert_allclose(reply["probs"], senti_model.classify(SAMPLE),
                                   atol=1e-12)


class TestSaliencyEndpoint:
    def test_empty_text_gives_empty_arrays(self, server):
        base, _ = server
        status, reply = call(base, "POST", "/models/senti/saliency",
                             {"text": "", "mode": "white"})
        assert status == 200
        assert reply == {"tokens": [], "scores": [], "hsps": []}

    def test_white_parity_with_library(self, server, senti_model):
        base, _ = server
        rng = np.random.default_rng(1)
        words = ["the", "movie", "was", "great", "boring", "plot", "lovely"]
        for _ in range(10):
            text = " ".join(rng.choice(words)
                            for _ in range(int(rng.integers(1, 12))))
            _, reply = call(base, "POST", "/models/senti/saliency",
                            {"text": text, "mode": "white"})
            doc = Doc.make(text)
            cls = senti_model.classes[int(senti_model.classify(text).argmax())]
            want_scores = saliency.word_scores(senti_model, doc, cls)
            assert reply["scores"] == want_scores
            _, want_spans = saliency.hot_items_word(doc, want_scores)
            assert [(h["start"], h["end"]) for h in reply["hsps"]] == \
                [(s.start, s.end) for s in want_spans]

    def test_black_parity_with_library(self, server, senti_model):
        base, _ = server
        _, reply = call(base, "POST", "/models/senti/saliency",
                        {"text": SAMPLE, "mode": "black"})
        table = occlusion.deviations(senti_model, Doc.make(SAMPLE))
        assert reply["scores"] == list(table.deviations)

    def test_white_mode_on_external_model_rejected(self, server):
        base, _ = server
        status, reply = call(base, "POST", "/models/ext/saliency",
                             {"text": SAMPLE, "mode": "white"})
        assert status == 400
        assert "gradients" in reply["error"]

    def test_black_mode_on_external_model_succeeds(self, server):
        base, _ = server
        status, reply = call(base, "POST", "/models/ext/saliency",
                             {"text": "the plot was boring .", "mode": "black"})
        assert status == 200
        assert len(reply["tokens"]) == 5


class TestHtpEndpoint:
    def test_lookup(self, server, senti_htps):
        base, _ = server
        status, reply = call(base, "GET", "/htp/senti/Positive")
        assert status == 200
        want = [e for e in senti_htps if e.cls == "Positive"]
        assert [e["phrase"] for e in reply["entries"]] == \
            [e.phrase for e in sorted(want, key=lambda e: e.rank)]

    def test_unknown_class_404(self, server):
        base, _ = server
        status, _ = call(base, "GET", "/htp/senti/Bogus")
        assert status == 404


class TestSessions:
    def make_session(self, base, text=SAMPLE, target="Negative"):
        status, view = call(base, "POST", "/sessions",
                            {"model": "senti", "text": text, "target": target})
        assert status == 200
        return view

    def test_fresh_session_mirrors_inputs(self, server):
        base, _ = server
        view = self.make_session(base)
        assert view["text"] == SAMPLE
        assert view["original_text"] == SAMPLE
        assert view["steps"] == []
        assert view["can_undo"] is False
        assert abs(sum(view["conf"]) - 1.0) < 1e-9

    def test_suggest_empty_strategies_gives_empty_list(self, server):
        base, _ = server
        view = self.make_session(base)
        status, reply = call(base, "POST",
                             f"/sessions/{view['session']}/suggest",
                             {"strategies": []})
        assert status == 200
        assert reply["candidates"] == []

    def test_suggest_sorted_by_target_gain(self, server):
        base, _ = server
        view = self.make_session(base)
        _, reply = call(base, "POST", f"/sessions/{view['session']}/suggest",
                        {"strategies": ["insert", "modify", "remove"]})
        cands = reply["candidates"]
        assert cands
        target_idx = view["classes"].index("Negative")
        confs = [c["conf_after"][target_idx] for c in cands]
        assert confs[0] >= max(confs)
        gains = [c["gain"] for c in cands]
        assert gains == sorted(gains, reverse=True)

    def test_apply_then_undo_restores_text_exactly(self, server):
        base, _ = server
        view = self.make_session(base)
        sid = view["session"]
        _, sug = call(base, "POST", f"/sessions/{sid}/suggest",
                      {"strategies": ["insert"]})
        top = sug["candidates"][0]
        status, after = call(base, "POST", f"/sessions/{sid}/apply",
                             {"candidate_id": top["id"]})
        assert status == 200
        assert after["text"] != SAMPLE
        assert after["steps"][-1]["conf_after"] == top["conf_after"]
        assert after["can_undo"] is True
        status, back = call(base, "POST", f"/sessions/{sid}/undo")
        assert status == 200
        assert back["text"] == SAMPLE
        assert back["can_undo"] is False

    def test_multi_apply_multi_undo(self, server):
        base, _ = server
        view = self.make_session(base)
        sid = view["session"]
        for _ in range(3):
            _, sug = call(base, "POST", f"/sessions/{sid}/suggest",
                          {"strategies": ["insert", "modify"]})
            _, view = call(base, "POST", f"/sessions/{sid}/apply",
                           {"candidate_id": sug["candidates"][0]["id"]})
        assert len(view["steps"]) == 3
        for _ in range(3):
            _, view = call(base, "POST", f"/sessions/{sid}/undo")
        assert view["text"] == SAMPLE
        assert view["steps"] == []

    def test_stale_candidate_rejected(self, server):
        base, _ = server
        view = self.make_session(base)
        sid = view["session"]
        _, sug = call(base, "POST", f"/sessions/{sid}/suggest",
                      {"strategies": ["insert"]})
        first = sug["candidates"][0]["id"]
        second = sug["candidates"][1]["id"]
        call(base, "POST", f"/sessions/{sid}/apply", {"candidate_id": first})
        status, reply = call(base, "POST", f"/sessions/{sid}/apply",
                             {"candidate_id": second})
        assert status == 409
        assert "stale" in reply["error"]

    def test_undo_on_empty_stack_409(self, server):
        base, _ = server
        view = self.make_session(base)
        status, _ = call(base, "POST", f"/sessions/{view['session']}/undo")
        assert status == 409

    def test_unknown_session_404(self, server):
        base, _ = server
        status, _ = call(base, "GET", "/sessions/shrug")
        assert status == 404

    def test_sessions_are_isolated(self, server):
        base, _ = server
        a = self.make_session(base, text="the movie was great .")
        b = self.make_session(base, text="the plot was boring .")
        _, sug_a = call(base, "POST", f"/sessions/{a['session']}/suggest",
                        {"strategies": ["insert"]})
        _, sug_b = call(base, "POST", f"/sessions/{b['session']}/suggest",
                        {"strategies": ["insert"]})
        call(base, "POST", f"/sessions/{a['session']}/apply",
             {"candidate_id": sug_a["candidates"][0]["id"]})
        _, view_b = call(base, "GET", f"/sessions/{b['session']}")
        assert view_b["text"] == "the plot was boring ."
        assert view_b["steps"] == []
        status, _ = call(base, "POST", f"/sessions/{b['session']}/apply",
                         {"candidate_id": sug_b["candidates"][0]["id"]})
        assert status == 200
        _, view_a = call(base, "GET", f"/sessions/{a['session']}")
        assert len(view_a["steps"]) == 1

    def test_snapshot_writes_loadable_trace(self, server, tmp_path):
        from advtext import store
        base, _ = server
        view = self.make_session(base)
        sid = view["session"]
        _, sug = call(base, "POST", f"/sessions/{sid}/suggest",
                      {"strategies": ["insert"]})
        call(base, "POST", f"/sessions/{sid}/apply",
             {"candidate_id": sug["candidates"][0]["id"]})
        path = tmp_path / "session.trace.json"
        status, reply = call(base, "POST", f"/sessions/{sid}/snapshot",
                             {"path": str(path)})
        assert status == 200
        assert reply["steps"] == 1
        trace = store.load_trace(path)
        assert trace.original.text == SAMPLE
        assert len(trace.steps) == 1

    def test_user_snippet_scored_and_applicable(self, server):
        base, _ = server
        view = self.make_session(base)
        sid = view["session"]
        _, sug = call(base, "POST", f"/sessions/{sid}/suggest",
                      {"strategies": ["insert"],
                       "snippets": [{"text": "but frankly boring", "offset": 0}]})
        mine = [c for c in sug["candidates"]
                if c["perturbation"]["method"] == "user-snippet"]
        assert mine
        status, after = call(base, "POST", f"/sessions/{sid}/apply",
                             {"candidate_id": mine[0]["id"]})
        assert status == 200
        assert "but frankly boring" in after["text"]
