"""Shared fixtures: the desk-scale trained models are expensive, so they
are built once per session and reused by saliency, occlusion, driver and
acceptance tests. Everything is seeded."""

from __future__ import annotations

import numpy as np
import pytest

import advtext as at
from advtext import models, saliency, store

TRAIN_SEED = 42


@pytest.fixture(scope="session")
def topic_corpus():
    return at.make_topic_corpus()


@pytest.fixture(scope="session")
def sentiment_corpus():
    return at.make_sentiment_corpus()


@pytest.fixture(scope="session")
def char_model(topic_corpus):
    train, _ = topic_corpus
    handle = at.build_char_cnn(at.toydata.TOPIC_CLASSES, at.Alphabet(),
                               length=256, seed=TRAIN_SEED)
    curve = models.train_classifier(handle, train, at.TrainConfig(
        epochs=4, learning_rate=0.08, batch_size=16, seed=TRAIN_SEED))
    handle.loss_curve = curve
    return handle


@pytest.fixture(scope="session")
def word_model(sentiment_corpus):
    train, _ = sentiment_corpus
    vocab = at.Vocabulary.from_docs(train, dim=32, seed=5)
    handle = at.build_word_cnn(at.toydata.SENTIMENT_CLASSES, vocab,
                               length=32, seed=TRAIN_SEED)
    curve = models.train_classifier(handle, train, at.TrainConfig(
        epochs=10, learning_rate=0.15, batch_size=32, seed=TRAIN_SEED))
    handle.loss_curve = curve
    return handle


@pytest.fixture(scope="session")
def topic_htps(char_model, topic_corpus):
    train, _ = topic_corpus
    return saliency.mine_htps(char_model, train)


@pytest.fixture(scope="session")
def lexicons():
    return store.load_lexicons()


class CountingStub:
    """Deterministic fake classifier that counts how many texts it saw."""

    def __init__(self, classes=("A", "B"), fn=None):
        self.classes = list(classes)
        self.calls = 0
        self.fn = fn or (lambda text: self._default(text))

    def _default(self, text):
        k = len(self.classes)
        h = (sum(ord(c) for c in text) % 97) / 97.0
        probs = np.full(k, (1.0 - h) / (k - 1)) if k > 1 else np.ones(1)
        probs[0] = h
        return probs / probs.sum()

    def classify(self, text):
        self.calls += 1
        return np.asarray(self.fn(text), dtype=np.float64)

    def classify_many(self, texts):
        return np.stack([self.classify(t) for t in texts]) if texts else \
            np.zeros((0, len(self.classes)))


@pytest.fixture
def counting_stub():
    return CountingStub
