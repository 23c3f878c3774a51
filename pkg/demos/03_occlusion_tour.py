"""Black-box identification: no gradients, only the classify interface.
Each word is occluded by an equal-length run of spaces; the confidence
drop against the seed ranks the words. Works against any oracle."""

import advtext as at
from advtext import occlusion

import _common

word = _common.sentiment_model()
doc = at.Doc.make("the camera was excellent but the manual seemed useless .")

print("seed:", doc.text)
probes = occlusion.gen_probes(doc)
print(f"\n{len(probes)} probes, one per token (first three):")
for p in probes[:3]:
    print(f"  [{p.token_index}] {p.text!r}")

table = occlusion.deviations(word, doc)
pred = word.classes[table.predicted_class]
print(f"\npredicted {pred} with confidence "
      f"{table.seed_conf[table.predicted_class]:.4f}")
print("deviation when occluded (positive = word supported the prediction):")
for tok, dev in zip(doc.tokens, table.deviations):
    bar = "#" * int(abs(dev) * 60)
    print(f"  {tok.word:<10} {dev:+.4f} {bar}")

spans = occlusion.hsps_black(word, doc, k=3)
print("\nblack-box hot spans (top-3 deviations, adjacent tokens merged):")
for s in spans:
    print(f"  {s.score:+.4f}  {s.surface!r}")
