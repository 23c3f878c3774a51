"""All persistence and file formats: CSV datasets, binary checkpoints,
HTP tables, attack traces, perturbation lexicons, and the INI defaults
file. Every save/load pair is an exact inverse on valid inputs; loading
never silently coerces."""

from __future__ import annotations

import configparser
import csv
import importlib.resources
import json
import struct
from pathlib import Path

import numpy as np

from . import engine
from .driver import AttackStep, AttackTrace
from .codec import Alphabet, Doc, Vocabulary
from .models import ClassifierHandle
from .perturb import Perturbation, PerturbLexicons
from .saliency import HtpEntry

CHECKPOINT_MAGIC = b"ATXCKPT\n"
CHECKPOINT_VERSION = 1


class CheckpointVersionError(ValueError):
    pass


class CheckpointTruncatedError(ValueError):
    pass


class CheckpointShapeError(ValueError):
    pass


# --- datasets ----------------------------------------------------------

def load_dataset(path) -> list[Doc]:
    """CSV with header ``label,text``; row numbers become doc ids."""
    docs = []
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != ["label", "text"]:
            raise ValueError(f"{path}: expected header 'label,text', got {header}")
        for i, row in enumerate(reader, 1):
            if len(row) != 2:
                raise ValueError(f"{path}: row {i} has {len(row)} fields, not 2")
            label, text = row
            if not label:
                raise ValueError(f"{path}: row {i} has an empty label")
            docs.append(Doc.make(text, id=str(i), label=label))
    return docs


def save_dataset(docs: list[Doc], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["label", "text"])
        for doc in docs:
            writer.writerow([doc.label, doc.text])


# --- checkpoints -------------------------------------------------------

def save_checkpoint(handle: ClassifierHandle, path) -> None:
    """Manifest followed by raw little-endian float64 parameter blocks in
    manifest order."""
    if handle.kind not in ("char", "word"):
        raise ValueError("only char/word models are checkpointable")
    net = handle.net
    params = net.param_items()
    if handle.kind == "char":
        codec = {"kind": "char", "length": handle.length,
                 "alphabet": handle.alphabet.chars}
    else:
        codec = {"kind": "word", "length": handle.length,
                 "words": handle.vocab.words[1:], "dim": handle.vocab.dim}
    manifest = {
        "version": CHECKPOINT_VERSION,
        "model_id": handle.model_id,
        "kind": handle.kind,
        "classes": handle.classes,
        "codec": codec,
        "input_shape": list(net.input_shape),
        "layers": [layer.spec() for layer in net.layers],
        "params": [{"path": p, "shape": list(a.shape)} for p, a in params],
    }
    blob = json.dumps(manifest).encode("utf-8")
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(struct.pack("<Q", len(blob)))
        f.write(blob)
        for _, arr in params:
            f.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_checkpoint(path) -> ClassifierHandle:
    with open(path, "rb") as f:
        magic = f.read(len(CHECKPOINT_MAGIC))
        if magic != CHECKPOINT_MAGIC:
            raise CheckpointVersionError(f"{path}: not a checkpoint file")
        size_bytes = f.read(8)
        if len(size_bytes) != 8:
            raise CheckpointTruncatedError(f"{path}: truncated manifest length")
        (size,) = struct.unpack("<Q", size_bytes)
        blob = f.read(size)
        if len(blob) != size:
            raise CheckpointTruncatedError(f"{path}: truncated manifest")
        manifest = json.loads(blob.decode("utf-8"))
        if manifest.get("version") != CHECKPOINT_VERSION:
            raise CheckpointVersionError(
                f"{path}: version {manifest.get('version')} != {CHECKPOINT_VERSION}")
        layers = [engine.layer_from_spec(s) for s in manifest["layers"]]
        net = engine.Network(layers, input_shape=tuple(manifest["input_shape"]))
        declared = {p["path"]: tuple(p["shape"]) for p in manifest["params"]}
        actual = dict(net.param_items())
        if set(declared) != set(actual):
            raise CheckpointShapeError(f"{path}: parameter paths do not match specs")
        for entry in manifest["params"]:
            shape = tuple(entry["shape"])
            if actual[entry["path"]].shape != shape:
                raise CheckpointShapeError(
                    f"{path}: {entry['path']} declared {shape}, "
                    f"layer wants {actual[entry['path']].shape}")
            count = int(np.prod(shape)) if shape else 1
            raw = f.read(8 * count)
            if len(raw) != 8 * count:
                raise CheckpointTruncatedError(
                    f"{path}: truncated block for {entry['path']}")
            net.set_param(entry["path"],
                          np.frombuffer(raw, dtype="<f8").reshape(shape).copy())
        if f.read(1):
            raise CheckpointShapeError(f"{path}: trailing data after last block")
    codec = manifest["codec"]
    if manifest["kind"] == "char":
        return ClassifierHandle(
            model_id=manifest["model_id"], kind="char",
            classes=manifest["classes"], net=net,
            alphabet=Alphabet(codec["alphabet"]), length=codec["length"])
    table = dict(net.param_items()).get("0.w")
    vocab = Vocabulary(codec["words"], dim=codec["dim"], embedding=table)
    return ClassifierHandle(
        model_id=manifest["model_id"], kind="word", classes=manifest["classes"],
        net=net, vocab=vocab, length=codec["length"])


# --- HTP tables --------------------------------------------------------

def save_htps(entries: list[HtpEntry], path) -> None:
    by_class: dict[str, list[HtpEntry]] = {}
    for e in entries:
        by_class.setdefault(e.cls, []).append(e)
    doc = {}
    for cls in sorted(by_class):
        ranked = sorted(by_class[cls], key=lambda e: e.rank)
        doc[cls] = [{"phrase": e.phrase, "frequency": e.frequency} for e in ranked]
    with open(path, "w", encoding="utf-8") as f:
        json.dump({"htp_table": doc}, f, indent=2, ensure_ascii=False)
        f.write("\n")


def load_htps(path) -> list[HtpEntry]:
    with open(path, encoding="utf-8") as f:
        doc = json.load(f)
    if "htp_table" not in doc:
        raise ValueError(f"{path}: missing htp_table key")
    entries = []
    for cls, items in doc["htp_table"].items():
        prev = None
        for rank, item in enumerate(items, 1):
            freq = item["frequency"]
            if prev is not None and freq > prev:
                raise ValueError(f"{path}: frequencies for {cls!r} not nonincreasing")
            prev = freq
            entries.append(HtpEntry(phrase=item["phrase"], cls=cls,
                                    frequency=freq, rank=rank))
    return entries


# --- attack traces -----------------------------------------------------

def _conf_list(v) -> list[float]:
    return [float(x) for x in np.asarray(v)]


def save_trace(trace: AttackTrace, path) -> None:
    doc = {
        "original": {"id": trace.original.id, "text": trace.original.text,
                     "label": trace.original.label},
        "target": trace.target,
        "outcome": trace.outcome,
        "final_text": trace.final_text,
        "final_conf": _conf_list(trace.final_conf),
        "classifier_calls": trace.classifier_calls,
        "steps": [{
            "kind": s.perturbation.kind,
            "start": s.perturbation.start,
            "end": s.perturbation.end,
            "original": s.perturbation.original,
            "payload": s.perturbation.payload,
            "method": s.perturbation.method,
            "provenance": s.perturbation.provenance,
            "token_start": s.perturbation.token_start,
            "token_end": s.perturbation.token_end,
            "conf_before": _conf_list(s.conf_before),
            "conf_after": _conf_list(s.conf_after),
            "direction": list(s.direction) if s.direction is not None else None,
        } for s in trace.steps],
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(doc, f, indent=2, ensure_ascii=False)
        f.write("\n")


def load_trace(path) -> AttackTrace:
    with open(path, encoding="utf-8") as f:
        doc = json.load(f)
    steps = []
    for s in doc["steps"]:
        p = Perturbation(kind=s["kind"], start=s["start"], end=s["end"],
                         original=s["original"], payload=s["payload"],
                         method=s["method"], provenance=s["provenance"],
                         token_start=s["token_start"], token_end=s["token_end"])
        steps.append(AttackStep(
            perturbation=p,
            conf_before=np.array(s["conf_before"], dtype=np.float64),
            conf_after=np.array(s["conf_after"], dtype=np.float64),
            direction=tuple(s["direction"]) if s["direction"] is not None else None))
    original = Doc.make(doc["original"]["text"], id=doc["original"]["id"],
                        label=doc["original"]["label"])
    return AttackTrace(original=original, target=doc["target"], steps=steps,
                       outcome=doc["outcome"], final_text=doc["final_text"],
                       final_conf=np.array(doc["final_conf"], dtype=np.float64),
                       classifier_calls=doc["classifier_calls"])


# --- lexicons ----------------------------------------------------------

def _data_path(name: str):
    return importlib.resources.files("advtext").joinpath("data", name)


def load_misspellings(path) -> dict[str, list[str]]:
    """``correct<TAB>miss1,miss2,...`` per line."""
    out: dict[str, list[str]] = {}
    with open(path, encoding="utf-8") as f:
        for ln, line in enumerate(f, 1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            if "\t" not in line:
                raise ValueError(f"{path}: line {ln} has no tab separator")
            word, misses = line.split("\t", 1)
            out[word.lower()] = [m for m in misses.split(",") if m]
    return out


def load_char_map(path) -> dict[str, str]:
    """``char<TAB>char`` per line (homoglyph map)."""
    out: dict[str, str] = {}
    with open(path, encoding="utf-8") as f:
        for ln, line in enumerate(f, 1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ValueError(f"{path}: line {ln} is not 'char<TAB>char'")
            out[parts[0]] = parts[1]
    return out


def load_phrase_map(path) -> dict[str, str]:
    """``phrase<TAB>replacement`` per line (paraphrase table)."""
    out: dict[str, str] = {}
    with open(path, encoding="utf-8") as f:
        for ln, line in enumerate(f, 1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ValueError(f"{path}: line {ln} is not 'phrase<TAB>replacement'")
            out[" ".join(parts[0].lower().split())] = parts[1]
    return out


def load_wordlist(path) -> set[str]:
    out = set()
    with open(path, encoding="utf-8") as f:
        for line in f:
            word = line.strip()
            if word and not word.startswith("#"):
                out.add(word.lower())
    return out


def load_templates(path) -> list[str]:
    out = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.rstrip("\n")
            if line and not line.startswith("#"):
                out.append(line)
    return out


def load_lexicons(misspellings=None, homoglyphs=None, paraphrases=None,
                  dispensable=None, templates=None,
                  template_year: str = "1996") -> PerturbLexicons:
    """Load the perturbation lexicons, falling back to the bundled files."""
    return PerturbLexicons(
        misspellings=load_misspellings(misspellings or _data_path("misspellings.tsv")),
        homoglyphs=load_char_map(homoglyphs or _data_path("homoglyphs.tsv")),
        paraphrases=load_phrase_map(paraphrases or _data_path("paraphrases.tsv")),
        dispensable=load_wordlist(dispensable or _data_path("dispensable.txt")),
        templates=load_templates(templates or _data_path("templates.txt")),
        template_year=template_year,
    )


def save_lexicons(lex: PerturbLexicons, directory) -> dict[str, Path]:
    """Write each lexicon in its file format; returns the paths."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = {}
    p = directory / "misspellings.tsv"
    with open(p, "w", encoding="utf-8") as f:
        for word in sorted(lex.misspellings):
            f.write(f"{word}\t{','.join(lex.misspellings[word])}\n")
    paths["misspellings"] = p
    p = directory / "homoglyphs.tsv"
    with open(p, "w", encoding="utf-8") as f:
        for a in sorted(lex.homoglyphs):
            f.write(f"{a}\t{lex.homoglyphs[a]}\n")
    paths["homoglyphs"] = p
    p = directory / "paraphrases.tsv"
    with open(p, "w", encoding="utf-8") as f:
        for a in sorted(lex.paraphrases):
            f.write(f"{a}\t{lex.paraphrases[a]}\n")
    paths["paraphrases"] = p
    p = directory / "dispensable.txt"
    with open(p, "w", encoding="utf-8") as f:
        for w in sorted(lex.dispensable):
            f.write(w + "\n")
    paths["dispensable"] = p
    p = directory / "templates.txt"
    with open(p, "w", encoding="utf-8") as f:
        for t in lex.templates:
            f.write(t + "\n")
    paths["templates"] = p
    return paths


# --- configuration -----------------------------------------------------

CONFIG_SECTION = "advtext"


def load_config(path) -> dict[str, str]:
    """INI defaults: one [advtext] section of string values; the CLI
    casts and overrides with explicit flags."""
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ValueError(f"{path}: cannot read config file")
    if CONFIG_SECTION not in parser:
        raise ValueError(f"{path}: missing [{CONFIG_SECTION}] section")
    return dict(parser[CONFIG_SECTION])
