"""Single entry point covering the full offline workflow: train, eval,
htp-mine, saliency, occlude, attack, campaign, overlap, fgsm-demo, serve.
Flags override values from an optional INI config file; every run prints
the resolved effective configuration. Human-readable tables go to stdout,
machine-readable files behind --out."""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

from . import driver, models, occlusion, saliency, service, store, toydata
from .codec import Alphabet, Doc, Vocabulary
from .engine import TrainConfig

# config-file fallbacks (INI [advtext] section) for these flag names
CONFIG_KEYS = ["length", "epochs", "learning_rate", "batch_size", "seed", "top",
               "budget", "cap", "min_gain", "mode", "per_pair", "dim", "jobs",
               "misspellings", "homoglyphs", "paraphrases", "dispensable",
               "templates", "template_year"]

DEFAULTS = {
    "length": 256, "epochs": 4, "learning_rate": 0.08, "batch_size": 16,
    "seed": 42, "top": 10, "budget": 5, "cap": 50, "min_gain": 1e-4,
    "mode": "white", "per_pair": 20, "dim": 32, "jobs": 1,
    "misspellings": None, "homoglyphs": None, "paraphrases": None,
    "dispensable": None, "templates": None, "template_year": "1996",
}

_CASTS = {"length": int, "epochs": int, "batch_size": int, "seed": int,
          "top": int, "budget": int, "cap": int, "per_pair": int, "dim": int,
          "jobs": int, "learning_rate": float, "min_gain": float}


def _resolve(args: argparse.Namespace) -> dict:
    """flag > config file > default; prints the effective configuration."""
    file_values = store.load_config(args.config) if args.config else {}
    resolved = {}
    for key in CONFIG_KEYS:
        flag = getattr(args, key, None)
        if flag is not None:
            resolved[key] = flag
        elif key in file_values:
            cast = _CASTS.get(key, str)
            resolved[key] = cast(file_values[key])
        else:
            resolved[key] = DEFAULTS[key]
    shown = {k: v for k, v in resolved.items() if v is not None}
    print("effective config:", " ".join(f"{k}={v}" for k, v in sorted(shown.items())))
    return resolved


def _load_lexicons(cfg: dict):
    return store.load_lexicons(
        misspellings=cfg["misspellings"], homoglyphs=cfg["homoglyphs"],
        paraphrases=cfg["paraphrases"], dispensable=cfg["dispensable"],
        templates=cfg["templates"], template_year=cfg["template_year"])


def _load_model(args, cfg) -> models.ClassifierHandle:
    if getattr(args, "oracle", None):
        if not getattr(args, "classes", None):
            raise SystemExit("--oracle needs --classes A,B,C in oracle order")
        return models.external_classifier(args.classes.split(","), args.oracle)
    if not getattr(args, "model", None):
        raise SystemExit("need --model CHECKPOINT or --oracle ADDRESS")
    return store.load_checkpoint(args.model)


def _pick_doc(args) -> Doc:
    if getattr(args, "text", None) is not None:
        return Doc.make(args.text, id="cli")
    if getattr(args, "data", None):
        docs = store.load_dataset(args.data)
        index = getattr(args, "index", 0) or 0
        if not 0 <= index < len(docs):
            raise SystemExit(f"--index {index} outside dataset of {len(docs)} rows")
        return docs[index]
    raise SystemExit("need --text or --data (with optional --index)")


def cmd_train(args, cfg) -> int:
    docs = store.load_dataset(args.data)
    classes = sorted({d.label for d in docs})
    seed, length = cfg["seed"], cfg["length"]
    if args.kind == "char":
        alphabet = Alphabet.from_file(args.alphabet) if args.alphabet else Alphabet()
        handle = models.build_char_cnn(classes, alphabet, length=length, seed=seed)
    else:
        if args.embeddings:
            vocab = Vocabulary.from_vector_file(args.embeddings)
        else:
            vocab = Vocabulary.from_docs(docs, dim=cfg["dim"], seed=seed)
        word_length = cfg["length"] if args.length is not None else 32
        handle = models.build_word_cnn(classes, vocab, length=word_length, seed=seed)
    curve = models.train_classifier(handle, docs, TrainConfig(
        epochs=cfg["epochs"], learning_rate=cfg["learning_rate"],
        batch_size=cfg["batch_size"], seed=seed))
    store.save_checkpoint(handle, args.out)
    print("epoch mean-loss:")
    for i, loss in enumerate(curve, 1):
        print(f"  {i:>3}  {loss:.6f}")
    print(f"saved checkpoint to {args.out} ({args.kind}, classes: {classes})")
    return 0


def cmd_eval(args, cfg) -> int:
    handle = store.load_checkpoint(args.model)
    docs = store.load_dataset(args.data)
    report = models.evaluate(handle, docs)
    print(f"accuracy: {report.accuracy:.4f} on {len(docs)} docs")
    print("confusion (true -> predicted):")
    for (true, pred), n in sorted(report.confusion.items()):
        print(f"  {true:<16} -> {pred:<16} {n}")
    return 0


def cmd_htp_mine(args, cfg) -> int:
    handle = _load_model(args, cfg)
    docs = store.load_dataset(args.data)
    dump: list | None = [] if args.phrase_dump else None
    if cfg["mode"] == "white":
        entries = saliency.mine_htps(handle, docs, top_n=cfg["top"],
                                     phrase_dump=dump)
    else:
        entries = occlusion.mine_htps_black(handle, docs, top_n=cfg["top"],
                                            word_dump=dump)
    for e in entries:
        print(f"{e.cls:<16} {e.rank:>3}  {e.phrase:<28} {e.frequency}")
    if args.phrase_dump:
        with open(args.phrase_dump, "w", encoding="utf-8") as f:
            for doc_id, cls, phrases in dump:
                if isinstance(phrases, str):
                    phrases = [phrases]
                f.write("\t".join([doc_id, cls, *phrases]) + "\n")
        print(f"per-sample dump written to {args.phrase_dump}")
    if args.out:
        store.save_htps(entries, args.out)
        print(f"table written to {args.out}")
    return 0


def cmd_saliency(args, cfg) -> int:
    handle = store.load_checkpoint(args.model)
    doc = _pick_doc(args)
    spans = saliency.hsps(handle, doc)
    print(f"predicted: {handle.classes[int(handle.classify(doc.text).argmax())]}")
    for s in spans:
        print(f"  [{s.start},{s.end})  score {s.score:.6f}  {s.surface!r}")
    if not spans:
        print("  (no hot phrases)")
    return 0


def cmd_occlude(args, cfg) -> int:
    handle = _load_model(args, cfg)
    doc = _pick_doc(args)
    table = occlusion.deviations(handle, doc, jobs=cfg["jobs"])
    pred = handle.classes[table.predicted_class]
    print(f"predicted: {pred}  confidence "
          f"{table.seed_conf[table.predicted_class]:.4f}")
    for tok, dev in zip(doc.tokens, table.deviations):
        print(f"  {dev:+.4f}  {tok.word}")
    if args.probe_dump:
        occlusion.dump_probes(doc, args.probe_dump)
        print(f"probe dump written to {args.probe_dump}")
    return 0


def cmd_attack(args, cfg) -> int:
    handle = _load_model(args, cfg)
    htps = store.load_htps(args.htp)
    lexicons = _load_lexicons(cfg)
    doc = _pick_doc(args)
    snippets = []
    for item in args.snippet or []:
        text, _, offset = item.rpartition("@")
        if not text:
            raise SystemExit(f"--snippet must be TEXT@OFFSET, got {item!r}")
        snippets.append((text, int(offset)))
    strategies = tuple(args.strategies.split(",")) if args.strategies else \
        ("insert", "modify", "remove")
    acfg = driver.AttackConfig(target=args.target, budget=cfg["budget"],
                               cap=cfg["cap"], min_gain=cfg["min_gain"],
                               mode=cfg["mode"], strategies=strategies)
    trace = driver.attack(handle, doc, acfg, htps, lexicons, snippets=snippets)
    print(f"outcome: {trace.outcome} after {len(trace.steps)} step(s), "
          f"{trace.classifier_calls} classifier calls")
    for i, step in enumerate(trace.steps, 1):
        p = step.perturbation
        print(f"  {i}. {p.kind}/{p.method} {p.provenance}")
        before = handle.classes[int(step.conf_before.argmax())]
        after = handle.classes[int(step.conf_after.argmax())]
        print(f"     {before} {step.conf_before.max():.3f} -> "
              f"{after} {step.conf_after.max():.3f}")
    print("final text:")
    print(trace.final_text)
    if args.out:
        store.save_trace(trace, args.out)
        print(f"trace written to {args.out}")
    return 0


def cmd_campaign(args, cfg) -> int:
    handle = _load_model(args, cfg)
    htps = store.load_htps(args.htp)
    lexicons = _load_lexicons(cfg)
    docs = store.load_dataset(args.data)
    if args.pairs == "all":
        pairs = driver.all_ordered_pairs(handle.classes)
    else:
        pairs = []
        for chunk in args.pairs.split(","):
            src, _, tgt = chunk.partition(":")
            if not tgt:
                raise SystemExit(f"--pairs expects SRC:TGT items, got {chunk!r}")
            pairs.append((src, tgt))
    acfg = driver.AttackConfig(target=handle.classes[0], budget=cfg["budget"],
                               cap=cfg["cap"], min_gain=cfg["min_gain"],
                               mode=cfg["mode"])
    report = driver.run_campaign(handle, docs, pairs, acfg, htps, lexicons,
                                 per_pair=cfg["per_pair"])
    print(report.format_table())
    if args.out:
        with open(args.out, "w", newline="", encoding="utf-8") as f:
            csv.writer(f).writerows(report.to_csv_rows())
        print(f"report written to {args.out}")
    return 0


def cmd_overlap(args, cfg) -> int:
    white = store.load_htps(args.white)
    black = store.load_htps(args.black)
    counts = driver.overlap_study(white, black, top_n=cfg["top"])
    for cls, n in counts.items():
        print(f"{cls:<16} {n}/{cfg['top']}")
    return 0


def cmd_fgsm_demo(args, cfg) -> int:
    handle = store.load_checkpoint(args.model)
    doc = _pick_doc(args)
    result = saliency.fgsm_baseline(handle, doc, epsilon=args.epsilon,
                                    flip_n=args.flips)
    pred = handle.classes[int(result.original_conf.argmax())]
    print(f"original ({pred} {result.original_conf.max():.3f}):")
    print(doc.text[:handle.length])
    pred2 = handle.classes[int(result.perturbed_conf.argmax())]
    print(f"\nepsilon={args.epsilon} gibberish demo "
          f"({pred2} {result.perturbed_conf.max():.3f}):")
    print(result.text)
    if args.flips:
        pred3 = handle.classes[int(result.flipped_conf.argmax())]
        print(f"\n{args.flips}-position flip variant "
              f"({pred3} {result.flipped_conf.max():.3f}):")
        print(result.flipped_text)
    return 0


def cmd_serve(args, cfg) -> int:
    handles = {}
    for item in args.model:
        model_id, _, path = item.partition("=")
        if not path:
            raise SystemExit(f"--model expects ID=CHECKPOINT, got {item!r}")
        handles[model_id] = store.load_checkpoint(path)
        handles[model_id].model_id = model_id
    htps = {}
    for item in args.htp or []:
        model_id, _, path = item.partition("=")
        if not path:
            raise SystemExit(f"--htp expects ID=TABLE, got {item!r}")
        htps[model_id] = store.load_htps(path)
    api = service.WorkbenchApi(handles, htps, _load_lexicons(cfg))
    service.serve_forever(api, host=args.host, port=args.port)
    return 0


def make_toy_data(outdir: str, seed: int) -> int:
    print(f"effective config: outdir={outdir} seed={seed}")
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    topic_train, topic_test = toydata.make_topic_corpus(seed=seed + 7)
    sent_train, sent_test = toydata.make_sentiment_corpus(seed=seed + 11)
    for name, docs in {"topic_train": topic_train, "topic_test": topic_test,
                       "sentiment_train": sent_train,
                       "sentiment_test": sent_test}.items():
        path = out / f"{name}.csv"
        store.save_dataset(docs, path)
        print(f"wrote {path} ({len(docs)} docs)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="advtext",
        description="craft and evaluate adversarial samples against "
                    "convolutional text classifiers")
    parser.add_argument("--config", help="INI file with [advtext] defaults")
    parser.add_argument("--make-toy-data", metavar="DIR",
                        help="generate the bundled desk-scale corpora and exit")
    parser.add_argument("--seed", type=int, help="global random seed")
    sub = parser.add_subparsers(dest="command")

    def common(p, *, data=False, model=False, oracle=False, doc=False, htp=False):
        if data:
            p.add_argument("--data", required=True, help="dataset CSV (label,text)")
        if model:
            p.add_argument("--model", help="checkpoint path")
        if oracle:
            p.add_argument("--oracle", help="external oracle address "
                                            "(cmd:... or http://...)")
            p.add_argument("--classes", help="comma-separated class names "
                                             "for --oracle")
        if doc:
            p.add_argument("--text", help="inline document text")
            p.add_argument("--data", help="dataset CSV to pick a doc from")
            p.add_argument("--index", type=int, default=0,
                           help="row index into --data (default 0)")
        if htp:
            p.add_argument("--htp", required=True, help="HTP table file")
        for key in ("misspellings", "homoglyphs", "paraphrases", "dispensable",
                    "templates"):
            p.add_argument(f"--{key}", help=f"{key} lexicon file")
        p.add_argument("--template-year", dest="template_year")

    p = sub.add_parser("train", help="train a classifier on a dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--kind", choices=["char", "word"], required=True)
    p.add_argument("--out", required=True, help="checkpoint output path")
    p.add_argument("--alphabet", help="alphabet file (char models)")
    p.add_argument("--embeddings", help="word-vector import file (word models)")
    p.add_argument("--length", type=int, help="input window (chars or tokens)")
    p.add_argument("--dim", type=int, help="embedding dimension")
    p.add_argument("--epochs", type=int)
    p.add_argument("--learning-rate", dest="learning_rate", type=float)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a dataset")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("htp-mine", help="mine hot training phrases")
    common(p, data=True, model=True, oracle=True)
    p.add_argument("--mode", choices=["white", "black"])
    p.add_argument("--top", type=int, help="entries per class")
    p.add_argument("--out", help="HTP table output file")
    p.add_argument("--phrase-dump", help="per-sample phrase dump file")
    p.set_defaults(func=cmd_htp_mine)

    p = sub.add_parser("saliency", help="white-box hot phrases of one doc")
    p.add_argument("--model", required=True)
    common(p, doc=True)
    p.set_defaults(func=cmd_saliency)

    p = sub.add_parser("occlude", help="black-box deviation table of one doc")
    common(p, model=True, oracle=True, doc=True)
    p.add_argument("--probe-dump", help="write probe texts, one per line")
    p.add_argument("--jobs", type=int, help="max in-flight probes")
    p.set_defaults(func=cmd_occlude)

    p = sub.add_parser("attack", help="greedy source/target attack on one doc")
    common(p, model=True, oracle=True, doc=True, htp=True)
    p.add_argument("--target", required=True, help="target class")
    p.add_argument("--budget", type=int)
    p.add_argument("--cap", type=int)
    p.add_argument("--min-gain", dest="min_gain", type=float)
    p.add_argument("--mode", choices=["white", "black"])
    p.add_argument("--strategies", help="comma subset of insert,modify,remove")
    p.add_argument("--snippet", action="append", metavar="TEXT@OFFSET",
                   help="user insertion snippet (repeatable)")
    p.add_argument("--out", help="trace output file (JSON)")
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("campaign", help="source/target attack matrix")
    common(p, model=True, oracle=True, htp=True)
    p.add_argument("--data", required=True)
    p.add_argument("--pairs", default="all", help='"all" or SRC:TGT,SRC:TGT')
    p.add_argument("--per-pair", dest="per_pair", type=int)
    p.add_argument("--budget", type=int)
    p.add_argument("--cap", type=int)
    p.add_argument("--min-gain", dest="min_gain", type=float)
    p.add_argument("--mode", choices=["white", "black"])
    p.add_argument("--out", help="CSV report output")
    p.set_defaults(func=cmd_campaign)

    p = sub.add_parser("overlap", help="white/black HTP table overlap")
    p.add_argument("--white", required=True)
    p.add_argument("--black", required=True)
    p.add_argument("--top", type=int)
    p.set_defaults(func=cmd_overlap)

    p = sub.add_parser("fgsm-demo", help="gradient-sign gibberish demo")
    p.add_argument("--model", required=True)
    common(p, doc=True)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--flips", type=int, default=0,
                   help="also flip the n highest-gradient positions")
    p.set_defaults(func=cmd_fgsm_demo)

    p = sub.add_parser("serve", help="run the workbench HTTP service")
    p.add_argument("--model", action="append", required=True,
                   metavar="ID=CHECKPOINT")
    p.add_argument("--htp", action="append", metavar="ID=TABLE")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8970)
    for key in ("misspellings", "homoglyphs", "paraphrases", "dispensable",
                "templates"):
        p.add_argument(f"--{key}")
    p.add_argument("--template-year", dest="template_year")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.make_toy_data:
        return make_toy_data(args.make_toy_data, args.seed or 0)
    if not args.command:
        parser.print_usage(sys.stderr)
        return 2
    try:
        cfg = _resolve(args)
        return args.func(args, cfg)
    except SystemExit:
        raise
    except (ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
