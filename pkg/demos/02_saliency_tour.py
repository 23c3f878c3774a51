"""White-box identification: cost gradients of the encoded input score
each character; hot characters concentrate in a few words, adjacent hot
words assemble into hot phrases (the spans every attack anchors on)."""

import advtext as at
from advtext import saliency

import _common

char = _common.topic_model()
_, test = at.make_topic_corpus()
doc = test[0]
pred = char.classes[int(char.classify(doc.text).argmax())]
print(f"doc {doc.id} (label {doc.label}, predicted {pred}):")
print(" ", doc.text[:140], "...\n")

scores = saliency.char_scores(char, doc, pred)
hot_chars, hot_words, phrases = saliency.hot_items(doc, scores, k=50)

print(f"top-50 hot character positions -> {len(hot_words)} hot words "
      f"(>= 3 hot chars each) -> {len(phrases)} hot phrases\n")
print("hot phrases by score:")
for span in phrases:
    print(f"  {span.score:9.5f}  {span.surface!r}")

print("\nhottest characters in context (marked with ^):")
line = doc.text[:100]
marks = "".join("^" if i in set(hot_chars) else " " for i in range(len(line)))
print(" ", line)
print(" ", marks)

print("\n=== word-level variant ===")
word = _common.sentiment_model()
wdoc = at.Doc.make("the movie was great but the ending felt terrible .")
wpred = word.classes[int(word.classify(wdoc.text).argmax())]
wscores = saliency.word_scores(word, wdoc, wpred)
print(f"predicted {wpred}; per-token gradient scores:")
for tok, s in zip(wdoc.tokens, wscores):
    bar = "#" * int(40 * s / (max(wscores) or 1))
    print(f"  {tok.word:<10} {s:8.5f} {bar}")
