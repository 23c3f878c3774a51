"""Bundled desk-scale corpus generators: a 4-class templated topic corpus
for the character-level model and a 2-class sentiment corpus for the
word-level model. Seeded, so every acceptance run sees the same data
without external downloads."""

from __future__ import annotations

import numpy as np

from .codec import Doc

TOPIC_CLASSES = ["Sport", "Finance", "Weather", "Kitchen"]
SENTIMENT_CLASSES = ["Negative", "Positive"]

_TOPIC_KEYWORDS = {
    "Sport": ["stadium", "tournament", "league", "referee", "goalkeeper",
              "midfielder", "championship", "playoff", "scoreboard", "coach",
              "striker", "season", "derby", "penalty", "trophy", "squad"],
    "Finance": ["dividend", "portfolio", "shares", "investor", "earnings",
                "revenue", "quarterly", "brokerage", "bond", "inflation",
                "takeover", "hedge", "liquidity", "margin", "audit", "treasury"],
    "Weather": ["rainfall", "thunderstorm", "forecast", "humidity", "blizzard",
                "drizzle", "temperature", "barometer", "overcast", "gust",
                "hailstone", "frost", "monsoon", "cyclone", "drought", "fog"],
    "Kitchen": ["recipe", "skillet", "simmer", "marinade", "oven", "garlic",
                "butter", "dough", "seasoning", "whisk", "casserole", "broth",
                "spatula", "cinnamon", "saucepan", "teaspoon"],
}

_TOPIC_FRAMES = [
    "the {a} near the {b} was {adj} all {time}.",
    "everyone talked about the {a} and the {b} after the {c}.",
    "a {adj} report on the {a} mentioned the {b} again.",
    "people watched the {a} while the {b} stayed {adj}.",
    "the {a} followed the {b} through a {adj} {c}.",
    "it was a {adj} {time} for the {a} and its {b}.",
    "nobody expected the {a} to change the {b} before the {c}.",
    "the {a} made the {b} look {adj} during the {c}.",
]

_TOPIC_ADJECTIVES = ["quiet", "busy", "strange", "steady", "lively", "plain",
                     "odd", "calm", "rough", "slow"]
_TOPIC_TIMES = ["morning", "afternoon", "evening", "week", "month", "day"]

_SENTIMENT_WORDS = {
    "Positive": ["great", "excellent", "wonderful", "amazing", "lovely",
                 "superb", "delightful", "charming", "enjoyable", "brilliant",
                 "pleasant", "satisfying"],
    "Negative": ["terrible", "awful", "boring", "disappointing", "dreadful",
                 "horrible", "annoying", "useless", "tedious", "mediocre",
                 "unpleasant", "frustrating"],
}

_SENTIMENT_NOUNS = ["movie", "plot", "acting", "story", "music", "battery",
                    "design", "camera", "screen", "keyboard", "ending",
                    "dialogue", "interface", "manual", "speaker", "remote"]

_SENTIMENT_FRAMES = [
    "the {n1} was {s1} and the {n2} seemed rather {s2} to me .",
    "i found the {n1} quite {s1} while the {n2} felt {s2} overall .",
    "honestly the {n1} looked {s1} but the {n2} stayed {s2} anyway .",
    "my friends called the {n1} {s1} and the {n2} truly {s2} .",
    "after a week the {n1} turned out {s1} and the {n2} very {s2} .",
]


def _pick(rng: np.random.Generator, pool: list[str]) -> str:
    return pool[int(rng.integers(len(pool)))]


def _topic_doc(rng: np.random.Generator, cls: str, doc_id: str) -> Doc:
    kws = _TOPIC_KEYWORDS[cls]
    sentences = []
    for _ in range(int(rng.integers(8, 12))):
        frame = _pick(rng, _TOPIC_FRAMES)
        sentences.append(frame.format(
            a=_pick(rng, kws), b=_pick(rng, kws), c=_pick(rng, kws),
            adj=_pick(rng, _TOPIC_ADJECTIVES), time=_pick(rng, _TOPIC_TIMES)))
    return Doc.make(" ".join(sentences), id=doc_id, label=cls)


def _sentiment_doc(rng: np.random.Generator, cls: str, doc_id: str) -> Doc:
    words = _SENTIMENT_WORDS[cls]
    sentences = []
    for _ in range(int(rng.integers(2, 4))):
        frame = _pick(rng, _SENTIMENT_FRAMES)
        sentences.append(frame.format(
            n1=_pick(rng, _SENTIMENT_NOUNS), n2=_pick(rng, _SENTIMENT_NOUNS),
            s1=_pick(rng, words), s2=_pick(rng, words)))
    return Doc.make(" ".join(sentences), id=doc_id, label=cls)


def make_topic_corpus(seed: int = 7, train_per_class: int = 200,
                      test_per_class: int = 50) -> tuple[list[Doc], list[Doc]]:
    rng = np.random.default_rng(seed)
    train, test = [], []
    for cls in TOPIC_CLASSES:
        for i in range(train_per_class):
            train.append(_topic_doc(rng, cls, f"{cls}-train-{i}"))
        for i in range(test_per_class):
            test.append(_topic_doc(rng, cls, f"{cls}-test-{i}"))
    return train, test


def make_sentiment_corpus(seed: int = 11, train_per_class: int = 300,
                          test_per_class: int = 75) -> tuple[list[Doc], list[Doc]]:
    rng = np.random.default_rng(seed)
    train, test = [], []
    for cls in SENTIMENT_CLASSES:
        for i in range(train_per_class):
            train.append(_sentiment_doc(rng, cls, f"{cls}-train-{i}"))
        for i in range(test_per_class):
            test.append(_sentiment_doc(rng, cls, f"{cls}-test-{i}"))
    return train, test
