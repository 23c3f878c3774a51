"""Train the two desk-scale classifiers on the bundled generated corpora
and look at what they learned.

The character-level model reads a 256-wide one-hot grid over a 69-symbol
alphabet; the word-level model reads 32 embedded tokens through parallel
convolution banks with max-over-time pooling.
"""

import advtext as at
from advtext import models

import _common

print("=== topic corpus (4 classes, character-level CNN) ===")
train, test = at.make_topic_corpus()
print(f"{len(train)} train / {len(test)} test docs; sample:")
print(" ", train[0].label, "->", train[0].text[:110], "...")

char = _common.topic_model()
report = models.evaluate(char, test)
print(f"held-out accuracy: {report.accuracy:.3f}")
print("confusion counts:")
for (true, pred), n in sorted(report.confusion.items()):
    marker = "" if true == pred else "   <- confusion"
    print(f"  {true:<10} classified {pred:<10} x{n}{marker}")

print()
print("=== sentiment corpus (2 classes, word-level CNN) ===")
strain, stest = at.make_sentiment_corpus()
word = _common.sentiment_model()
print(f"held-out accuracy: {models.evaluate(word, stest).accuracy:.3f}")

text = "the interface was wonderful and the battery stayed brilliant ."
conf = word.classify(text)
print(f"\nclassify({text!r})")
for cls, p in zip(word.classes, conf):
    print(f"  {cls:<10} {p:.4f}")
