# Copyright 2026 The Polyshot Authors
# SPDX-License-Identifier: Apache-2.0

"""Offline extraction: upstream datasets to pool/query JSONL, sentence
vectors to BMFV files, and URIEL features to the language registry.

    python -m polyshot.embed_extract convert raw.jsonl --dataset mcsqa --language en --split train -o data/
    python -m polyshot.embed_extract vectors data/mcsqa_train.jsonl --encoder sentence-transformers/LaBSE -o v.bmfv
    python -m polyshot.embed_extract registry en de ja -o registry.json
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import struct
import sys
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

DEFAULT_ENCODER = "sentence-transformers/LaBSE"
FEATURE_SETS = ("syntax_knn", "phonology_knn", "inventory_knn", "geo", "fam")
CHOICE_LABELS = "abcde"

# ISO 639-1 to URIEL (ISO 639-3) codes.
URIEL_CODES = {
    "ar": "arb", "bn": "ben", "de": "deu", "en": "eng", "fi": "fin", "fr": "fra",
    "id": "ind", "ja": "jpn", "ko": "kor", "nl": "nld", "pt": "por", "ru": "rus",
    "sw": "swh", "te": "tel", "th": "tha", "zh": "cmn",
}

# id prefixes used by TyDi QA GoldP
TYDI_LANGUAGES = {
    "arabic": "ar", "bengali": "bn", "english": "en", "finnish": "fi", "indonesian": "id",
    "japanese": "ja", "korean": "ko", "russian": "ru", "swahili": "sw", "telugu": "te", "thai": "th",
}

Encoder = Callable[[list[str]], np.ndarray]


class ExtractionError(Exception):
    pass


def sha256_file(path: str | os.PathLike) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _atomic_write(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


@dataclass
class ExtractionManifest:
    dataset_id: str
    encoder_id: str = ""
    outputs: dict[str, str] = field(default_factory=dict)  # path -> sha256

    def record(self, path: str | os.PathLike) -> None:
        self.outputs[str(path)] = sha256_file(path)

    def verify(self) -> list[str]:
        """Paths whose current checksum no longer matches."""
        return [p for p, s in sorted(self.outputs.items()) if not Path(p).exists() or sha256_file(p) != s]

    def to_json(self) -> dict:
        return {"dataset_id": self.dataset_id, "encoder_id": self.encoder_id,
                "outputs": dict(sorted(self.outputs.items()))}

    def write(self, path: str | os.PathLike) -> None:
        _atomic_write(Path(path), (json.dumps(self.to_json(), indent=2) + "\n").encode())

    @classmethod
    def load(cls, path: str | os.PathLike) -> "ExtractionManifest":
        j = json.loads(Path(path).read_text())
        return cls(j["dataset_id"], j.get("encoder_id", ""), dict(j.get("outputs", {})))


# ---------------------------------------------------------------------------
# Dataset conversion


def _read_rows(path: Path) -> list[dict]:
    text = path.read_text(encoding="utf-8")
    if path.suffix == ".json":
        data = json.loads(text)
        rows = data.get("data", data) if isinstance(data, dict) else data
    else:
        rows = [json.loads(line) for line in text.splitlines() if line.strip()]
    if not isinstance(rows, list):
        raise ExtractionError(f"{path}: unrecognized layout")
    return rows


def _mcsqa_choices(row: dict, i: int) -> list[str]:
    q = row.get("question")
    # HF layout {"choices": {"label": [...], "text": [...]}}; original {"question": {"choices": [...]}}
    if isinstance(row.get("choices"), dict):
        labels, texts = row["choices"].get("label", []), row["choices"].get("text", [])
        pairs = sorted(zip((str(x).lower() for x in labels), texts))
    elif isinstance(q, dict) and isinstance(q.get("choices"), list):
        pairs = sorted((str(c["label"]).lower(), c["text"]) for c in q["choices"])
    else:
        raise ExtractionError(f"row {i}: no choices")
    if [p[0] for p in pairs] != list(CHOICE_LABELS):
        raise ExtractionError(f"row {i}: expected choices labeled a-e, got {[p[0] for p in pairs]}")
    return [t for _, t in pairs]


def _convert_mcsqa(row: dict, i: int, language: str | None) -> dict:
    q = row.get("question")
    stem = q.get("stem") if isinstance(q, dict) else q
    if not isinstance(stem, str) or not stem.strip():
        raise ExtractionError(f"row {i}: missing question")
    lang = row.get("lang") or row.get("language") or language
    if not lang:
        raise ExtractionError(f"row {i}: no language field and none given")
    rid = row.get("id")
    if not rid:
        raise ExtractionError(f"row {i}: missing id")
    out = {"id": str(rid), "language": lang, "source": stem,
           "choices": [{"label": l, "text": t} for l, t in zip(CHOICE_LABELS, _mcsqa_choices(row, i))]}
    gold = row.get("answerKey")
    if gold:
        out["reference"] = str(gold).lower()
    return out


def _convert_tydi(row: dict, i: int, language: str | None) -> dict:
    for key in ("id", "context", "question"):
        if not row.get(key):
            raise ExtractionError(f"row {i}: missing {key}")
    lang = row.get("language") or language or TYDI_LANGUAGES.get(str(row["id"]).split("-", 1)[0])
    if not lang:
        raise ExtractionError(f"row {i}: cannot tell the language of {row['id']!r}")
    out = {"id": str(row["id"]), "language": lang, "context": row["context"], "source": row["question"]}
    answers = row.get("answers") or {}
    texts = answers.get("text") if isinstance(answers, dict) else None
    if texts:
        out["reference"] = texts[0]
    return out


def convert_dataset(raw_path: str | os.PathLike, dataset_id: str, out_dir: str | os.PathLike, *,
                    split: str = "train", language: str | None = None) -> Path:
    """Writes <out_dir>/<dataset_id>_<split>.jsonl. The train split becomes a
    pool (every row needs a gold answer); other splits become query files."""
    converters = {"mcsqa": _convert_mcsqa, "tydi": _convert_tydi}
    if dataset_id not in converters:
        raise ExtractionError(f"unknown dataset {dataset_id!r}; expected one of {sorted(converters)}")
    rows = _read_rows(Path(raw_path))
    lines = []
    for i, row in enumerate(rows):
        rec = converters[dataset_id](row, i, language)
        if split == "train":
            if "reference" not in rec:
                raise ExtractionError(f"row {i}: train split row has no gold answer")
            rec["embedding_ref"] = rec["id"]
        else:
            rec["input"] = rec.pop("source")
            if "reference" in rec:
                rec["gold"] = rec.pop("reference")
        lines.append(json.dumps(rec, ensure_ascii=False, sort_keys=True))
    out = Path(out_dir) / f"{dataset_id}_{split}.jsonl"
    _atomic_write(out, ("\n".join(lines) + "\n").encode("utf-8"))
    return out


# ---------------------------------------------------------------------------
# Vectors


def embedding_text(record: dict, include_choices: bool = False) -> str:
    text = record.get("source", record.get("input", ""))
    if include_choices and record.get("choices"):
        text += "\n" + "\n".join(f"{c['label']}. {c['text']}" for c in record["choices"])
    return text


def write_bmfv(path: str | os.PathLike, dim: int, rows: Iterable[tuple[str, Sequence[float]]]) -> Path:
    """Little-endian: "BMFV" u32 version u32 dim u64 count, then per row
    u16 key length, key bytes and dim float32 values."""
    body = bytearray()
    count = 0
    seen = set()
    for key, vec in rows:
        kb = key.encode("utf-8")
        if key in seen:
            raise ExtractionError(f"duplicate vector key {key!r}")
        if len(kb) > 0xFFFF:
            raise ExtractionError(f"vector key too long: {key[:40]!r}...")
        v = np.asarray(vec, dtype="<f4")
        if v.shape != (dim,):
            raise ExtractionError(f"vector {key!r} has shape {v.shape}, expected ({dim},)")
        seen.add(key)
        body += struct.pack("<H", len(kb)) + kb + v.tobytes()
        count += 1
    header = b"BMFV" + struct.pack("<IIQ", 1, dim, count)
    out = Path(path)
    _atomic_write(out, header + bytes(body))
    return out


def read_bmfv(path: str | os.PathLike) -> tuple[int, dict[str, np.ndarray]]:
    data = Path(path).read_bytes()
    if data[:4] != b"BMFV":
        raise ExtractionError(f"{path}: not a vector file")
    version, dim, count = struct.unpack_from("<IIQ", data, 4)
    if version != 1:
        raise ExtractionError(f"{path}: unsupported version {version}")
    off, rows = 20, {}
    for _ in range(count):
        (n,) = struct.unpack_from("<H", data, off)
        key = data[off + 2:off + 2 + n].decode("utf-8")
        off += 2 + n
        rows[key] = np.frombuffer(data, dtype="<f4", count=dim, offset=off).copy()
        off += 4 * dim
    if off != len(data):
        raise ExtractionError(f"{path}: {len(data) - off} trailing bytes")
    return dim, rows


def hashing_encoder(dim: int = 64) -> Encoder:
    """Deterministic test encoder: a unit vector seeded by the text's SHA-256."""

    def encode(texts: list[str]) -> np.ndarray:
        out = np.empty((len(texts), dim))
        for i, t in enumerate(texts):
            seed = int.from_bytes(hashlib.sha256(t.encode("utf-8")).digest()[:8], "little")
            v = np.random.default_rng(seed).standard_normal(dim)
            out[i] = v / np.linalg.norm(v)
        return out

    return encode


def load_encoder(encoder_id: str) -> Encoder:
    if encoder_id.startswith("hash-"):
        return hashing_encoder(int(encoder_id[5:]))
    try:
        from sentence_transformers import SentenceTransformer

        model = SentenceTransformer(encoder_id)
    except Exception as e:  # import failure or missing weights
        raise ExtractionError(f"cannot load encoder {encoder_id!r}: {e}") from e
    return lambda texts: model.encode(texts, convert_to_numpy=True, show_progress_bar=False)


def export_vectors(jsonl_paths: str | os.PathLike | Sequence[str | os.PathLike], out_path: str | os.PathLike, *,
                   encoder: str | Encoder = DEFAULT_ENCODER, batch_size: int = 64,
                   include_choices: bool = False) -> Path:
    """One row per record, keyed by embedding_ref (query files: the id)."""
    if isinstance(jsonl_paths, (str, os.PathLike)):
        jsonl_paths = [jsonl_paths]
    encode = load_encoder(encoder) if isinstance(encoder, str) else encoder
    keys, texts = [], []
    for p in jsonl_paths:
        for rec in _read_rows(Path(p)):
            keys.append(rec.get("embedding_ref") or rec["id"])
            texts.append(embedding_text(rec, include_choices))
    rows, dim = [], None
    for start in range(0, len(texts), batch_size):
        batch = np.asarray(encode(texts[start:start + batch_size]), dtype=np.float64)
        if batch.ndim != 2 or batch.shape[0] != len(texts[start:start + batch_size]):
            raise ExtractionError(f"encoder returned shape {batch.shape} for a batch of "
                                  f"{len(texts[start:start + batch_size])}")
        if dim is None:
            dim = batch.shape[1]
        elif batch.shape[1] != dim:
            raise ExtractionError(f"encoder dimension drifted from {dim} to {batch.shape[1]}")
        rows.extend(zip(keys[start:start + batch_size], batch))
    if dim is None:
        raise ExtractionError("no records to embed")
    return write_bmfv(out_path, dim, rows)


# ---------------------------------------------------------------------------
# Language registry


def export_lang_registry(languages: Sequence[str], out_path: str | os.PathLike | None = None) -> dict:
    """Concatenated URIEL feature sets per language, values rounded to 7
    decimals, with indices of missing values listed under "missing"."""
    unknown = [l for l in languages if l not in URIEL_CODES and len(l) != 3]
    if unknown:
        raise ExtractionError(f"no URIEL code for {unknown}")
    codes = {l: URIEL_CODES.get(l, l) for l in languages}
    try:
        import lang2vec.lang2vec as l2v
    except ImportError as e:
        raise ExtractionError("export_lang_registry needs the lang2vec package") from e
    missing_codes = [c for c in codes.values() if c not in l2v.available_languages()]
    if missing_codes:
        raise ExtractionError(f"languages not in URIEL: {missing_codes}")

    sizes = {}
    for fs in FEATURE_SETS:
        sizes[fs] = len(l2v.get_features([codes[languages[0]]], fs)[codes[languages[0]]])
    feats = l2v.get_features(sorted(set(codes.values())), "+".join(FEATURE_SETS))
    registry = {"feature_sets": [], "dimension": sum(sizes.values()), "languages": {}}
    offset = 0
    for fs in FEATURE_SETS:
        registry["feature_sets"].append({"name": fs, "offset": offset, "size": sizes[fs]})
        offset += sizes[fs]
    for lang in languages:
        raw = feats[codes[lang]]
        values = [0.0 if x == "--" else round(float(x), 7) for x in raw]
        missing = [i for i, x in enumerate(raw) if x == "--"]
        registry["languages"][lang] = {"features": values, "missing": missing}
    if out_path is not None:
        _atomic_write(Path(out_path), json.dumps(registry).encode())
    return registry


# ---------------------------------------------------------------------------


def main(argv: Sequence[str] | None = None) -> int:
    ap = argparse.ArgumentParser(prog="python -m polyshot.embed_extract")
    sub = ap.add_subparsers(dest="cmd", required=True)
    c = sub.add_parser("convert", help="upstream rows to pool or query JSONL")
    c.add_argument("raw")
    c.add_argument("--dataset", required=True, choices=["mcsqa", "tydi"])
    c.add_argument("--split", default="train")
    c.add_argument("--language")
    c.add_argument("-o", "--out-dir", default=".")
    v = sub.add_parser("vectors", help="embed JSONL records into a BMFV file")
    v.add_argument("jsonl", nargs="+")
    v.add_argument("--encoder", default=DEFAULT_ENCODER)
    v.add_argument("--batch-size", type=int, default=64)
    v.add_argument("--include-choices", action="store_true")
    v.add_argument("-o", "--output", required=True)
    r = sub.add_parser("registry", help="export URIEL features for languages")
    r.add_argument("languages", nargs="+")
    r.add_argument("-o", "--output", required=True)
    for p in (c, v, r):
        p.add_argument("--manifest", help="append produced files to this manifest")
    a = ap.parse_args(argv)

    try:
        if a.cmd == "convert":
            out, dataset, enc = convert_dataset(a.raw, a.dataset, a.out_dir, split=a.split, language=a.language), a.dataset, ""
        elif a.cmd == "vectors":
            out = export_vectors(a.jsonl, a.output, encoder=a.encoder, batch_size=a.batch_size,
                                 include_choices=a.include_choices)
            dataset, enc = "", a.encoder
        else:
            export_lang_registry(a.languages, a.output)
            out, dataset, enc = Path(a.output), "", ""
    except ExtractionError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    if a.manifest:
        m = ExtractionManifest.load(a.manifest) if Path(a.manifest).exists() else ExtractionManifest(dataset)
        m.dataset_id = m.dataset_id or dataset
        m.encoder_id = m.encoder_id or enc
        m.record(out)
        m.write(a.manifest)
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
