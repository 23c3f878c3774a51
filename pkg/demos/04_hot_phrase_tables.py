"""Corpus-level hot training phrases, mined both ways, and how much the
two knowledge modes agree: the white-box table comes from per-sample
gradient phrases, the black-box table from the single largest-deviation
word of each sample."""

import advtext as at
from advtext import driver, occlusion, saliency

import _common

word = _common.sentiment_model()
train, _ = at.make_sentiment_corpus()

print("mining white-box table (gradients) ...")
white = saliency.mine_htps(word, train, top_n=10)
print("mining black-box table (occlusion) ...")
black = occlusion.mine_htps_black(word, train, top_n=10)

for cls in word.classes:
    print(f"\n=== {cls} ===")
    print(f"{'rank':<6}{'white-box':<22}{'black-box':<22}")
    w = [e for e in white if e.cls == cls]
    b = [e for e in black if e.cls == cls]
    both = {e.phrase for e in w} & {e.phrase for e in b}
    for i in range(10):
        wp = f"{w[i].phrase} ({w[i].frequency})" if i < len(w) else ""
        bp = f"{b[i].phrase} ({b[i].frequency})" if i < len(b) else ""
        star = " *" if i < len(w) and w[i].phrase in both else ""
        print(f"{i + 1:<6}{wp:<22}{bp:<22}{star}")

overlap = driver.overlap_study(white, black, top_n=10)
print("\ntop-10 overlap per class (starred rows appear in both):")
for cls, n in overlap.items():
    print(f"  {cls:<10} {n}/10")
