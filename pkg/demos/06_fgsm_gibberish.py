"""Why plain gradient-sign perturbation fails on text: applying the sign
of the input-cost gradient to the whole one-hot grid decodes to gibberish,
and even flipping only the highest-gradient positions stays conspicuous.
The greedy attack from demo 05 changes a few percent of the characters;
this baseline mangles most of them."""

import advtext as at
from advtext import saliency

import _common

char = _common.topic_model()
_, test = at.make_topic_corpus()
doc = test[10]
window = doc.text[:char.length]

print("original (window):")
print(" ", window[:160], "...")

for eps in (0.0, 0.2, 1.0):
    res = saliency.fgsm_baseline(char, doc, epsilon=eps)
    decoded = res.text.ljust(len(window))[:len(window)]
    changed = sum(a != b for a, b in zip(window, decoded)) / len(window)
    pred = char.classes[int(res.perturbed_conf.argmax())]
    print(f"\nepsilon={eps}: {changed:.0%} of characters changed, "
          f"classified {pred} ({res.perturbed_conf.max():.3f})")
    print(" ", decoded[:160])

print("\nflip-only variant (30 highest-gradient positions):")
res = saliency.fgsm_baseline(char, doc, epsilon=0.0, flip_n=30)
print(" ", res.flipped_text[:160], "...")
pred = char.classes[int(res.flipped_conf.argmax())]
print(f"  classified {pred} ({res.flipped_conf.max():.3f})")
