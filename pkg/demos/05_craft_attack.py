"""A full source/target attack: greedy hill-climbing over insertion,
modification and removal candidates until the classifier reports the
attacker's chosen class. Every accepted edit is shown with its
confidence movement, and the final text stays readable."""

import advtext as at
from advtext import driver, perturb, store

import _common

char = _common.topic_model()
htps = _common.topic_htps(char)
lexicons = store.load_lexicons()

_, test = at.make_topic_corpus()
doc = next(d for d in test if d.label == "Sport")
source = char.classes[int(char.classify(doc.text).argmax())]
target = "Kitchen"
print(f"attacking doc {doc.id}: {source} -> {target}")
print("original:", doc.text[:160], "...\n")

cfg = driver.AttackConfig(target=target, budget=5, cap=50, mode="white")
trace = driver.attack(char, doc, cfg, htps, lexicons)

print(f"outcome: {trace.outcome} in {len(trace.steps)} step(s), "
      f"{trace.classifier_calls} classifier calls")
for i, step in enumerate(trace.steps, 1):
    p = step.perturbation
    tgt_idx = char.classes.index(target)
    print(f"\nstep {i}: {p.kind} via {p.method}")
    print(f"  payload: {p.payload!r}" if p.payload else
          f"  removed: {p.original!r}")
    print(f"  {target} confidence {step.conf_before[tgt_idx]:.3f} -> "
          f"{step.conf_after[tgt_idx]:.3f}")
    if step.direction is not None:
        d_src, d_tgt = step.direction
        verdict = "follows" if d_src > 0 and d_tgt < 0 else "violates"
        print(f"  gradient direction check: source {d_src:+.5f}, "
          f"target {d_tgt:+.5f} ({verdict} the desirable direction)")

print("\nfinal text:")
print(" ", trace.final_text[:200], "...")
changed = perturb.levenshtein(doc.text, trace.final_text)
print(f"\n{changed} of {len(doc.text)} characters changed "
      f"({changed / len(doc.text):.1%})")

print("\n=== the same attack, black-box (occlusion-guided) ===")
cfg = driver.AttackConfig(target=target, budget=5, cap=50, mode="black")
trace = driver.attack(char, doc, cfg, htps, lexicons)
print(f"outcome: {trace.outcome} in {len(trace.steps)} step(s), "
      f"{trace.classifier_calls} classifier calls (probes included)")
