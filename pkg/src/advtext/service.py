"""HTTP JSON API over the library: classification, saliency (both
knowledge modes), hot-table lookup, and session-based interactive
crafting with suggest/apply/undo. This is the surface the browser
workbench and external oracles talk to.

Sessions are in-memory and isolated; requests within one session are
serialized by a per-session lock while model handles are shared
immutably across threads.
"""

from __future__ import annotations

import hashlib
import json
import re
import threading
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np

from . import occlusion, perturb, saliency
from .codec import Doc
from .models import ClassifierHandle
from .perturb import CandidateScore, Perturbation, PerturbLexicons
from .saliency import HtpEntry

STRATEGY_ORDER = {"insert": 0, "modify": 1, "remove": 2}


class ApiError(Exception):
    def __init__(self, status: int, message: str):
        super().__init__(message)
        self.status = status


@dataclass
class Session:
    session_id: str
    model_id: str
    original_text: str
    doc: Doc
    target: str
    mode: str = "white"
    cap: int = 50
    version: int = 0
    steps: list[dict] = field(default_factory=list)
    undo_stack: list[tuple[Perturbation, list[float]]] = field(default_factory=list)
    suggestions: dict[str, CandidateScore] = field(default_factory=dict)
    suggest_version: int = -1
    lock: threading.Lock = field(default_factory=threading.Lock)


def _conf_list(v) -> list[float]:
    return [float(x) for x in np.asarray(v)]


def _perturbation_dict(p: Perturbation) -> dict:
    return {"kind": p.kind, "start": p.start, "end": p.end,
            "original": p.original, "payload": p.payload, "method": p.method,
            "provenance": p.provenance}


class WorkbenchApi:
    """Route handlers, independent of the HTTP plumbing (testable directly)."""

    def __init__(self, models: dict[str, ClassifierHandle],
                 htps: dict[str, list[HtpEntry]], lexicons: PerturbLexicons):
        self.models = models
        self.htps = htps
        self.lexicons = lexicons
        self.sessions: dict[str, Session] = {}
        self._counter = 0
        self._lock = threading.Lock()

    # -- helpers --------------------------------------------------------

    def _model(self, model_id: str) -> ClassifierHandle:
        if model_id not in self.models:
            raise ApiError(404, f"unknown model {model_id!r}")
        return self.models[model_id]

    def _session(self, session_id: str) -> Session:
        if session_id not in self.sessions:
            raise ApiError(404, f"unknown session {session_id!r}")
        return self.sessions[session_id]

    def _token_saliency(self, handle: ClassifierHandle, doc: Doc, mode: str):
        if not doc.tokens:
            return [], [], []
        if mode == "white":
            if handle.kind == "external":
                raise ApiError(400, "no gradients available for an external model")
            cls = handle.classes[int(handle.classify(doc.text).argmax())]
            if handle.kind == "char":
                scores = saliency.char_scores(handle, doc, cls)
                _, _, spans = saliency.hot_items(doc, scores)
                score_at = {s.position: s.score for s in scores}
                token_scores = [sum(score_at.get(p, 0.0)
                                    for p in range(t.char_start, t.char_end))
                                for t in doc.tokens]
            else:
                token_scores = saliency.word_scores(handle, doc, cls)
                _, spans = saliency.hot_items_word(doc, token_scores)
        elif mode == "black":
            table = occlusion.deviations(handle, doc)
            token_scores = list(table.deviations)
            spans = occlusion.hsps_black(handle, doc, table=table)
        else:
            raise ApiError(400, f"unknown mode {mode!r}")
        tokens = [t.word for t in doc.tokens]
        hsps = [{"start": s.start, "end": s.end, "surface": s.surface,
                 "score": s.score, "kind": s.kind} for s in spans]
        return tokens, token_scores, hsps

    def _session_view(self, s: Session) -> dict:
        handle = self._model(s.model_id)
        conf = _conf_list(handle.classify(s.doc.text))
        return {
            "session": s.session_id,
            "model": s.model_id,
            "text": s.doc.text,
            "original_text": s.original_text,
            "target": s.target,
            "mode": s.mode,
            "classes": handle.classes,
            "conf": conf,
            "steps": s.steps,
            "can_undo": bool(s.undo_stack),
            "version": s.version,
        }

    # -- endpoints ------------------------------------------------------

    def classify(self, model_id: str, body: dict) -> dict:
        handle = self._model(model_id)
        if "text" not in body or not isinstance(body["text"], str):
            raise ApiError(400, "body must carry a string 'text'")
        probs = handle.classify(body["text"])
        return {"classes": handle.classes, "probs": _conf_list(probs)}

    def saliency(self, model_id: str, body: dict) -> dict:
        handle = self._model(model_id)
        if "text" not in body or not isinstance(body["text"], str):
            raise ApiError(400, "body must carry a string 'text'")
        mode = body.get("mode", "white")
        doc = Doc.make(body["text"])
        tokens, scores, hsps = self._token_saliency(handle, doc, mode)
        return {"tokens": tokens, "scores": scores, "hsps": hsps}

    def htp_table(self, model_id: str, cls: str) -> dict:
        self._model(model_id)
        entries = [e for e in self.htps.get(model_id, []) if e.cls == cls]
        if not entries:
            raise ApiError(404, f"no HTP table for class {cls!r} of {model_id!r}")
        return {"class": cls, "entries": [
            {"phrase": e.phrase, "frequency": e.frequency, "rank": e.rank}
            for e in sorted(entries, key=lambda e: e.rank)]}

    def create_session(self, body: dict) -> dict:
        model_id = body.get("model")
        handle = self._model(model_id)
        text = body.get("text")
        if not isinstance(text, str):
            raise ApiError(400, "body must carry a string 'text'")
        target = body.get("target") or handle.classes[0]
        if target not in handle.classes:
            raise ApiError(400, f"unknown target class {target!r}")
        mode = body.get("mode", "white")
        if mode not in ("white", "black"):
            raise ApiError(400, f"unknown mode {mode!r}")
        if mode == "white" and handle.kind == "external":
            raise ApiError(400, "white mode needs an introspectable model")
        with self._lock:
            self._counter += 1
            sid = f"s{self._counter}"
        session = Session(session_id=sid, model_id=model_id, original_text=text,
                          doc=Doc.make(text, id=sid), target=target, mode=mode,
                          cap=int(body.get("cap", 50)))
        self.sessions[sid] = session
        return self._session_view(session)

    def session_view(self, session_id: str) -> dict:
        s = self._session(session_id)
        with s.lock:
            return self._session_view(s)

    def suggest(self, session_id: str, body: dict) -> dict:
        s = self._session(session_id)
        handle = self._model(s.model_id)
        strategies = body.get("strategies", ["insert", "modify", "remove"])
        bad = set(strategies) - set(STRATEGY_ORDER)
        if bad:
            raise ApiError(400, f"unknown strategies {sorted(bad)}")
        target = body.get("target", s.target)
        if target not in handle.classes:
            raise ApiError(400, f"unknown target class {target!r}")
        snippets = []
        for item in body.get("snippets", []):
            try:
                snippets.append((str(item["text"]), int(item["offset"])))
            except (KeyError, TypeError, ValueError):
                raise ApiError(400, "snippets must be {text, offset} objects") from None
        with s.lock:
            s.target = target
            target_idx = handle.classes.index(target)
            doc = s.doc
            if not strategies:
                s.suggestions = {}
                s.suggest_version = s.version
                return {"target": target, "candidates": []}
            if s.mode == "white":
                hsps = saliency.hsps(handle, doc)
            else:
                hsps = occlusion.hsps_black(handle, doc)
            candidates: list[CandidateScore] = []
            if "insert" in strategies:
                table = [e for e in self.htps.get(s.model_id, []) if e.cls == target]
                if not table and not snippets:
                    raise ApiError(400, f"no HTP table for class {target!r}")
                if table:
                    candidates += perturb.propose_insertions(
                        doc, hsps, table, self.lexicons, m=s.cap, snippets=snippets)
                elif snippets:
                    candidates += [CandidateScore(perturbation=perturb._insert_at(
                        doc, off, text, "user-snippet", "user"))
                        for text, off in snippets]
            if "modify" in strategies:
                candidates += perturb.propose_modifications(doc, hsps,
                                                            self.lexicons, m=s.cap)
            if "remove" in strategies:
                candidates += perturb.propose_removals(doc, hsps, self.lexicons,
                                                       m=s.cap)
            conf_before = handle.classify(doc.text)
            texts = [perturb.apply(doc, c.perturbation).text for c in candidates]
            confs = handle.classify_many(texts) if texts else []
            for c, after in zip(candidates, confs):
                c.conf_before = conf_before
                c.conf_after = after
                c.target_gain = float(after[target_idx] - conf_before[target_idx])
                c.changed_chars = perturb.changed_chars(c.perturbation)
            candidates.sort(key=lambda c: (
                -c.target_gain, c.changed_chars,
                STRATEGY_ORDER[c.perturbation.kind], c.perturbation.start))
            s.suggestions = {}
            s.suggest_version = s.version
            out = []
            for c in candidates:
                cid = self._candidate_id(s.version, c.perturbation)
                s.suggestions[cid] = c
                out.append({
                    "id": cid,
                    "perturbation": _perturbation_dict(c.perturbation),
                    "gain": c.target_gain,
                    "conf_after": _conf_list(c.conf_after),
                    "changed_chars": c.changed_chars,
                })
            return {"target": target, "candidates": out}

    @staticmethod
    def _candidate_id(version: int, p: Perturbation) -> str:
        key = json.dumps([version, p.kind, p.start, p.end, p.original, p.payload,
                          p.method], ensure_ascii=False)
        return hashlib.sha1(key.encode("utf-8")).hexdigest()[:16]

    def apply(self, session_id: str, body: dict) -> dict:
        s = self._session(session_id)
        cid = body.get("candidate_id")
        with s.lock:
            if s.suggest_version != s.version or cid not in s.suggestions:
                raise ApiError(409, "stale or unknown candidate id; request "
                                    "suggestions again")
            cand = s.suggestions[cid]
            conf_before = _conf_list(cand.conf_before)
            s.undo_stack.append((cand.perturbation, conf_before))
            s.doc = perturb.apply(s.doc, cand.perturbation)
            s.version += 1
            s.suggestions = {}
            s.steps.append({
                "perturbation": _perturbation_dict(cand.perturbation),
                "conf_before": conf_before,
                "conf_after": _conf_list(cand.conf_after),
            })
            return self._session_view(s)

    def undo(self, session_id: str) -> dict:
        s = self._session(session_id)
        with s.lock:
            if not s.undo_stack:
                raise ApiError(409, "nothing to undo")
            p, _ = s.undo_stack.pop()
            s.doc = perturb.revert(s.doc, p)
            s.steps.pop()
            s.version += 1
            s.suggestions = {}
            return self._session_view(s)

    def snapshot(self, session_id: str, body: dict) -> dict:
        """Persist the session's edit history as a regular attack trace."""
        from . import store
        from .driver import AttackStep, AttackTrace

        s = self._session(session_id)
        path = body.get("path")
        if not isinstance(path, str) or not path:
            raise ApiError(400, "body must carry a string 'path'")
        handle = self._model(s.model_id)
        with s.lock:
            conf = handle.classify(s.doc.text)
            target_idx = handle.classes.index(s.target)
            steps = []
            for record in s.steps:
                p = record["perturbation"]
                steps.append(AttackStep(
                    perturbation=Perturbation(
                        kind=p["kind"], start=p["start"], end=p["end"],
                        original=p["original"], payload=p["payload"],
                        method=p["method"], provenance=p["provenance"]),
                    conf_before=np.array(record["conf_before"]),
                    conf_after=np.array(record["conf_after"])))
            outcome = "success" if int(conf.argmax()) == target_idx \
                else "budget-exhausted"
            trace = AttackTrace(
                original=Doc.make(s.original_text, id=s.session_id),
                target=s.target, steps=steps, outcome=outcome,
                final_text=s.doc.text, final_conf=conf,
                classifier_calls=0)
            try:
                store.save_trace(trace, path)
            except OSError as e:
                raise ApiError(400, f"cannot write snapshot: {e}") from e
            return {"path": path, "steps": len(steps), "outcome": outcome}


ROUTES = [
    ("POST", re.compile(r"^/models/([^/]+)/classify$"), "classify"),
    ("POST", re.compile(r"^/models/([^/]+)/saliency$"), "saliency"),
    ("GET", re.compile(r"^/htp/([^/]+)/([^/]+)$"), "htp_table"),
    ("POST", re.compile(r"^/sessions$"), "create_session"),
    ("GET", re.compile(r"^/sessions/([^/]+)$"), "session_view"),
    ("POST", re.compile(r"^/sessions/([^/]+)/suggest$"), "suggest"),
    ("POST", re.compile(r"^/sessions/([^/]+)/apply$"), "apply"),
    ("POST", re.compile(r"^/sessions/([^/]+)/undo$"), "undo"),
    ("POST", re.compile(r"^/sessions/([^/]+)/snapshot$"), "snapshot"),
]


class _Handler(BaseHTTPRequestHandler):
    api: WorkbenchApi

    def log_message(self, fmt, *args):  # quiet by default
        pass

    def _reply(self, status: int, payload: dict):
        body = json.dumps(payload, ensure_ascii=False).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(body)

    def do_OPTIONS(self):
        self.send_response(204)
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
        self.send_header("Access-Control-Allow-Headers", "Content-Type")
        self.end_headers()

    def _dispatch(self, method: str):
        for verb, pattern, name in ROUTES:
            if verb != method:
                continue
            m = pattern.match(self.path)
            if not m:
                continue
            args = list(m.groups())
            if method == "POST":
                length = int(self.headers.get("Content-Length", 0))
                raw = self.rfile.read(length) if length else b"{}"
                if name != "undo":  # undo takes no body, but drain it anyway
                    try:
                        body = json.loads(raw.decode("utf-8")) if raw else {}
                    except json.JSONDecodeError:
                        return self._reply(400, {"error": "request body is not JSON"})
                    if not isinstance(body, dict):
                        return self._reply(400,
                                           {"error": "request body must be an object"})
                    args.append(body)
            try:
                result = getattr(self.api, name)(*args)
                return self._reply(200, result)
            except ApiError as e:
                return self._reply(e.status, {"error": str(e)})
            except ValueError as e:
                return self._reply(400, {"error": str(e)})
        return self._reply(404, {"error": f"no route for {method} {self.path}"})

    def do_GET(self):
        self._dispatch("GET")

    def do_POST(self):
        self._dispatch("POST")


def make_server(api: WorkbenchApi, host: str = "127.0.0.1",
                port: int = 8970) -> ThreadingHTTPServer:
    handler = type("BoundHandler", (_Handler,), {"api": api})
    return ThreadingHTTPServer((host, port), handler)


def serve_forever(api: WorkbenchApi, host: str = "127.0.0.1",
                  port: int = 8970) -> None:
    server = make_server(api, host, port)
    print(f"workbench service listening on http://{host}:{server.server_address[1]}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.shutdown()
