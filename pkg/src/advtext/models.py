"""Concrete CharCNN and WordCNN classifiers over the engine, a uniform
text-in / confidence-vector-out interface, and training/evaluation entry
points. An "external" kind wraps a classifier the toolkit cannot
introspect, reached over subprocess pipes or HTTP."""

from __future__ import annotations

import json
import subprocess
import urllib.request
from dataclasses import dataclass, field

import numpy as np

from . import engine
from .codec import Alphabet, Doc, Vocabulary, encode_chars, encode_words
from .engine import (Conv1D, Dense, Dropout, Embedding, GlobalMaxPool, MaxPool1D,
                     Network, Parallel, Relu, Softmax, TrainConfig)

RENORM_TOLERANCE = 1e-6


class OracleError(RuntimeError):
    """External oracle unreachable or returned a malformed reply; carries
    the raw reply text when one was received."""

    def __init__(self, message: str, raw_reply: str | None = None):
        super().__init__(message)
        self.raw_reply = raw_reply


@dataclass
class EvalReport:
    accuracy: float
    confusion: dict[tuple[str, str], int]  # (true class, predicted class) -> count

    def class_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for (true, _), n in self.confusion.items():
            counts[true] = counts.get(true, 0) + n
        return counts


@dataclass
class ClassifierHandle:
    """Uniform classifier: text in, per-class probability vector out.

    kind 'char' and 'word' wrap an engine Network plus its codec config;
    kind 'external' holds an oracle address ("cmd:..." for a line-based
    subprocess, or an http(s) URL accepting {"text": ...} POSTs).
    """

    model_id: str
    kind: str  # char | word | external
    classes: list[str]
    net: Network | None = None
    alphabet: Alphabet | None = None
    length: int = 0  # L for char models, T for word models
    vocab: Vocabulary | None = None
    address: str = ""
    _proc: subprocess.Popen | None = field(default=None, repr=False)

    def __post_init__(self):
        if len(set(self.classes)) != len(self.classes):
            raise ValueError("class names must be distinct")

    def encode(self, text: str) -> np.ndarray:
        doc = Doc.make(text)
        if self.kind == "char":
            return encode_chars(doc, self.alphabet, self.length).grid
        if self.kind == "word":
            return encode_words(doc, self.vocab, self.length).indices
        raise ValueError(f"kind {self.kind!r} has no local encoding")

    def classify(self, text: str) -> np.ndarray:
        if self.kind in ("char", "word"):
            return engine.forward(self.net, self.encode(text))
        return self._ask_oracle(text)

    def classify_many(self, texts: list[str]) -> np.ndarray:
        """Batched classification; one probability row per text."""
        if not texts:
            return np.zeros((0, len(self.classes)))
        if self.kind in ("char", "word"):
            batch = np.stack([self.encode(t) for t in texts])
            return engine.forward(self.net, batch)
        return np.stack([self._ask_oracle(t) for t in texts])

    # --- external oracle protocol -------------------------------------

    def _ask_oracle(self, text: str) -> np.ndarray:
        if self.address.startswith("cmd:"):
            reply = self._ask_subprocess(text)
        elif self.address.startswith(("http://", "https://")):
            reply = self._ask_http(text)
        else:
            raise OracleError(f"unsupported oracle address {self.address!r}")
        return self._parse_reply(reply)

    def _ask_subprocess(self, text: str) -> str:
        # one request line out, one probability line back; newlines in the
        # text would break the framing, so they are flattened to spaces
        if self._proc is None or self._proc.poll() is not None:
            self._proc = subprocess.Popen(
                self.address[len("cmd:"):], shell=True, text=True,
                stdin=subprocess.PIPE, stdout=subprocess.PIPE)
        try:
            self._proc.stdin.write(text.replace("\n", " ") + "\n")
            self._proc.stdin.flush()
            reply = self._proc.stdout.readline()
        except (BrokenPipeError, OSError) as e:
            raise OracleError(f"oracle subprocess failed: {e}") from e
        if not reply:
            raise OracleError("oracle subprocess closed its output", raw_reply="")
        return reply

    def _ask_http(self, text: str) -> str:
        body = json.dumps({"text": text}).encode("utf-8")
        req = urllib.request.Request(self.address, data=body,
                                     headers={"Content-Type": "application/json"})
        try:
            with urllib.request.urlopen(req, timeout=10.0) as resp:
                raw = resp.read().decode("utf-8")
        except OSError as e:
            raise OracleError(f"oracle unreachable: {e}") from e
        try:
            probs = json.loads(raw)["probs"]
        except (json.JSONDecodeError, KeyError, TypeError):
            raise OracleError("malformed oracle reply", raw_reply=raw) from None
        return " ".join(repr(float(p)) for p in probs)

    def _parse_reply(self, reply: str) -> np.ndarray:
        try:
            probs = np.array([float(v) for v in reply.split()], dtype=np.float64)
        except ValueError:
            raise OracleError("non-numeric oracle reply", raw_reply=reply) from None
        if probs.shape != (len(self.classes),):
            raise OracleError(
                f"oracle replied {probs.size} values for {len(self.classes)} classes",
                raw_reply=reply)
        total = probs.sum()
        if abs(total - 1.0) >= RENORM_TOLERANCE:
            raise OracleError(f"oracle probabilities sum to {total!r}",
                              raw_reply=reply)
        return probs / total


def build_char_cnn(classes: list[str], alphabet: Alphabet, length: int = 256,
                   conv_blocks: list[tuple[int, int, int]] | None = None,
                   dense_units: list[int] | None = None,
                   dropout: float = 0.0, pool_over_time: bool = True,
                   seed: int = 0, model_id: str = "char") -> ClassifierHandle:
    """Character-level CNN over one-hot grids.

    conv_blocks is a list of (kernel width, output channels, local pool
    width) triples, pool width 0 meaning no local pool; the stack ends in
    max-over-time pooling (or a plain flatten when pool_over_time=False)
    followed by the dense head. Desk-scale default: two conv blocks.
    """
    if len(classes) < 2:
        raise ValueError("need at least 2 classes")
    if conv_blocks is None:
        conv_blocks = [(7, 16, 2), (3, 24, 0)]
    if dense_units is None:
        dense_units = [32]
    rng = np.random.default_rng(seed)
    layers: list[engine.Layer] = []
    shape = (length, len(alphabet))
    shapes = [shape]

    def step(layer):
        nonlocal shape
        layers.append(layer)
        try:
            shape = layer.out_shape(shape)
        except engine.EngineError as e:
            raise engine.EngineError(
                f"cannot build stack: {e}; shape trace so far: {shapes}") from None
        shapes.append(shape)

    for width, channels, pool in conv_blocks:
        step(Conv1D(width, shape[1], channels, rng))
        layers.append(Relu())
        if pool:
            step(MaxPool1D(pool))
    if pool_over_time:
        step(GlobalMaxPool())
    features = int(np.prod(shape))
    for units in dense_units:
        layers.append(Dense(features, units, rng))
        layers.append(Relu())
        if dropout:
            layers.append(Dropout(dropout))
        features = units
    layers.append(Dense(features, len(classes), rng))
    layers.append(Softmax())
    net = Network(layers, input_shape=(length, len(alphabet)))
    return ClassifierHandle(model_id=model_id, kind="char", classes=list(classes),
                            net=net, alphabet=alphabet, length=length)


def full_scale_char_arch() -> dict:
    """The large stack: six conv layers, three dense layers. Constructible
    for shape testing; training it is out of desk scope."""
    return {
        "conv_blocks": [(7, 256, 3), (7, 256, 3), (3, 256, 0),
                        (3, 256, 0), (3, 256, 0), (3, 256, 3)],
        "dense_units": [1024, 1024],
        "dropout": 0.5,
        "pool_over_time": False,
        "length": 1014,
    }


def build_word_cnn(classes: list[str], vocab: Vocabulary, length: int = 32,
                   kernel_widths: tuple[int, ...] = (3, 4, 5), maps: int = 16,
                   dropout: float = 0.5, seed: int = 0,
                   model_id: str = "word") -> ClassifierHandle:
    """Word-level CNN: embedding, parallel conv banks with max-over-time
    pooling, dropout, and a dense softmax head."""
    if len(classes) < 2:
        raise ValueError("need at least 2 classes")
    if length < max(kernel_widths):
        raise ValueError(f"length {length} shorter than widest kernel "
                         f"{max(kernel_widths)}")
    rng = np.random.default_rng(seed)
    branches = []
    for width in kernel_widths:
        branches.append([Conv1D(width, vocab.dim, maps, rng), Relu(),
                         GlobalMaxPool()])
    layers: list[engine.Layer] = [
        Embedding(len(vocab), vocab.dim, rng, table=vocab.embedding),
        Parallel(branches),
        Dropout(dropout),
        Dense(maps * len(kernel_widths), len(classes), rng),
        Softmax(),
    ]
    net = Network(layers, input_shape=(length,))
    return ClassifierHandle(model_id=model_id, kind="word", classes=list(classes),
                            net=net, vocab=vocab, length=length)


def external_classifier(classes: list[str], address: str,
                        model_id: str = "external") -> ClassifierHandle:
    return ClassifierHandle(model_id=model_id, kind="external",
                            classes=list(classes), address=address)


def train_classifier(handle: ClassifierHandle, docs: list[Doc],
                     config: TrainConfig) -> list[float]:
    """Encode labeled docs and run SGD on the underlying network."""
    if handle.kind not in ("char", "word"):
        raise ValueError("only char/word models are trainable here")
    class_index = {c: i for i, c in enumerate(handle.classes)}
    dataset = []
    for doc in docs:
        if doc.label not in class_index:
            raise ValueError(f"unknown label {doc.label!r}")
        dataset.append((handle.encode(doc.text), class_index[doc.label]))
    _, curve = engine.train(handle.net, dataset, config)
    return curve


def evaluate(handle: ClassifierHandle, docs: list[Doc]) -> EvalReport:
    if not docs:
        raise ValueError("cannot evaluate on an empty dataset")
    class_index = {c: i for i, c in enumerate(handle.classes)}
    for doc in docs:
        if doc.label not in class_index:
            raise ValueError(f"unknown label {doc.label!r}")
    probs = handle.classify_many([d.text for d in docs])
    confusion: dict[tuple[str, str], int] = {}
    correct = 0
    for doc, row in zip(docs, probs):
        pred = handle.classes[int(row.argmax())]
        confusion[(doc.label, pred)] = confusion.get((doc.label, pred), 0) + 1
        correct += pred == doc.label
    return EvalReport(accuracy=correct / len(docs), confusion=confusion)


def predicted_class(handle: ClassifierHandle, text: str) -> tuple[str, np.ndarray]:
    conf = handle.classify(text)
    return handle.classes[int(conf.argmax())], conf
