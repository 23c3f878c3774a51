"""Shared setup for the demo scripts: train-or-load the two desk-scale
models and their hot-phrase tables, cached under demos/out/."""

from pathlib import Path

import advtext as at
from advtext import models, saliency, store

OUT = Path(__file__).parent / "out"


def topic_model():
    OUT.mkdir(exist_ok=True)
    ckpt = OUT / "topic.ckpt"
    if ckpt.exists():
        return store.load_checkpoint(ckpt)
    print("training the topic CharCNN (first run only) ...")
    train, test = at.make_topic_corpus()
    handle = at.build_char_cnn(at.toydata.TOPIC_CLASSES, at.Alphabet(),
                               length=256, seed=42)
    models.train_classifier(handle, train, at.TrainConfig(
        epochs=4, learning_rate=0.08, batch_size=16, seed=42))
    acc = models.evaluate(handle, test).accuracy
    print(f"  held-out accuracy {acc:.3f}")
    store.save_checkpoint(handle, ckpt)
    return handle


def sentiment_model():
    OUT.mkdir(exist_ok=True)
    ckpt = OUT / "sentiment.ckpt"
    if ckpt.exists():
        return store.load_checkpoint(ckpt)
    print("training the sentiment WordCNN (first run only) ...")
    train, test = at.make_sentiment_corpus()
    vocab = at.Vocabulary.from_docs(train, dim=32, seed=5)
    handle = at.build_word_cnn(at.toydata.SENTIMENT_CLASSES, vocab,
                               length=32, seed=42)
    models.train_classifier(handle, train, at.TrainConfig(
        epochs=10, learning_rate=0.15, batch_size=32, seed=42))
    acc = models.evaluate(handle, test).accuracy
    print(f"  held-out accuracy {acc:.3f}")
    store.save_checkpoint(handle, ckpt)
    return handle


def topic_htps(handle):
    path = OUT / "topic_htps.json"
    if path.exists():
        return store.load_htps(path)
    print("mining topic hot training phrases (first run only) ...")
    train, _ = at.make_topic_corpus()
    entries = saliency.mine_htps(handle, train)
    store.save_htps(entries, path)
    return entries
