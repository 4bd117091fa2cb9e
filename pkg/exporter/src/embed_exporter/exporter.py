"""Encode a raw text corpus with a pretrained sentence encoder and write the
canonical "textlier-emb" JSON-lines embedding file.

The file format and the sentence-splitting rule are the contract with the
downstream toolkit; both are mirrored here so this package stays standalone.
Vector values are hardware-dependent floating point, so only the structure
(ids, labels, sentence counts, dimensions) is guaranteed reproducible.
"""

from __future__ import annotations

import argparse
import json
import re
import sys
from dataclasses import dataclass

import numpy as np

FORMAT_NAME = "textlier-emb"
FORMAT_VERSION = 1
DEFAULT_MODEL = "sentence-transformers/all-mpnet-base-v2"  # 768-dim output

_SENTENCE_BOUNDARY = re.compile(r"[.!?](?=\s|$)")


def split_sentences(text: str) -> list[str]:
    """Same rule as the downstream toolkit: split at '.', '!' or '?' followed
    by whitespace or end of text; trim; drop empties; whole text if none."""
    if not text or not text.strip():
        raise ValueError("cannot split empty or whitespace-only text")
    parts = [p.strip() for p in _SENTENCE_BOUNDARY.split(text)]
    sentences = [p for p in parts if p]
    return sentences if sentences else [text.strip()]


@dataclass
class ExporterConfig:
    inputs: list[str]
    output: str
    model_name: str = DEFAULT_MODEL
    max_sent: int = 32
    batch_size: int = 32


class SentenceTransformerEncoder:
    """Thin adapter over sentence-transformers (imported lazily)."""

    def __init__(self, model_name: str):
        try:
            from sentence_transformers import SentenceTransformer
        except ImportError as exc:
            raise RuntimeError(
                "sentence-transformers is not installed; install the 'sbert' "
                "extra or pass a custom encoder") from exc
        try:
            self._model = SentenceTransformer(model_name)
        except Exception as exc:
            raise RuntimeError(
                f"failed to load sentence encoder {model_name!r}: {exc}") from exc
        self.embed_dim = int(self._model.get_sentence_embedding_dimension())

    def encode(self, sentences: list[str], batch_size: int) -> np.ndarray:
        return np.asarray(self._model.encode(sentences, batch_size=batch_size,
                                             show_progress_bar=False),
                          dtype=np.float64)


def read_raw_corpus(path: str) -> list[dict]:
    docs = []
    with open(path, encoding="utf-8") as f:
        for i, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                rec["id"], rec["text"]
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise ValueError(f"bad raw document at {path}:{i}: {exc}") from exc
            docs.append(rec)
    return docs


def export(config: ExporterConfig, encoder=None) -> int:
    """Encode all input corpora into config.output; returns document count.

    `encoder` must expose embed_dim and encode(sentences, batch_size); when
    None a sentence-transformers model named by the config is loaded.
    """
    docs = []
    for path in config.inputs:
        docs.extend(read_raw_corpus(path))
    if encoder is None:
        encoder = SentenceTransformerEncoder(config.model_name)
    seen = set()
    for doc in docs:
        if doc["id"] in seen:
            raise ValueError(f"duplicate document id {doc['id']!r}")
        seen.add(doc["id"])

    per_doc_sentences = [split_sentences(d["text"]) for d in docs]
    flat = [s for sents in per_doc_sentences for s in sents]
    vectors = np.empty((0, encoder.embed_dim))
    if flat:
        vectors = encoder.encode(flat, batch_size=config.batch_size)
    # validate before anything is written, so a bad encoder aborts cleanly
    if vectors.ndim != 2 or vectors.shape != (len(flat), encoder.embed_dim):
        raise ValueError(
            f"encoder returned shape {vectors.shape}, expected "
            f"({len(flat)}, {encoder.embed_dim})")
    if not np.all(np.isfinite(vectors)):
        raise ValueError("encoder produced non-finite embeddings")

    with open(config.output, "w", encoding="utf-8") as f:
        header = {"format": FORMAT_NAME, "version": FORMAT_VERSION,
                  "embed_dim": int(encoder.embed_dim),
                  "max_sent": config.max_sent}
        f.write(json.dumps(header) + "\n")
        cursor = 0
        for doc, sents in zip(docs, per_doc_sentences):
            rows = vectors[cursor:cursor + len(sents)]
            cursor += len(sents)
            label = 1 if doc.get("source") == "outlier_corpus" else 0
            rec = {"id": doc["id"], "label": label,
                   "sentences": [[float(v) for v in row] for row in rows]}
            f.write(json.dumps(rec) + "\n")
    return len(docs)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="embed-exporter",
        description="Encode a raw corpus with a pretrained sentence encoder "
                    "and write the textlier embedding file")
    parser.add_argument("--input", action="append", required=True,
                        dest="inputs", help="raw corpus JSON-lines (repeatable)")
    parser.add_argument("--out", required=True)
    parser.add_argument("--model", default=DEFAULT_MODEL)
    parser.add_argument("--max-sent", type=int, default=32)
    parser.add_argument("--batch-size", type=int, default=32)
    args = parser.parse_args(argv)
    config = ExporterConfig(inputs=args.inputs, output=args.out,
                            model_name=args.model, max_sent=args.max_sent,
                            batch_size=args.batch_size)
    try:
        n = export(config)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except RuntimeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    print(f"exported {n} documents -> {config.output}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
