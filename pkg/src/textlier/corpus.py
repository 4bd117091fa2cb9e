"""Everything between raw text and document matrices.

Covers sentence splitting, the embedding-provider boundary (with a hermetic
feature-hashing embedder so tests never need a network), outlier injection,
stratified splitting, minority oversampling, and the canonical JSON-lines
embedding file format.

File format (UTF-8 JSON lines):
    line 1: {"format": "textlier-emb", "version": 1, "embed_dim": D, "max_sent": M}
    lines 2..: {"id": str, "label": 0|1, "sentences": [[D reals] x k]}, k >= 1
Truncation to max_sent and zero padding happen at load time, not on disk.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import FormatError

FORMAT_NAME = "textlier-emb"
FORMAT_VERSION = 1

_SENTENCE_BOUNDARY = re.compile(r"[.!?](?=\s|$)")


class Source(str, Enum):
    NORMAL = "normal_corpus"
    OUTLIER = "outlier_corpus"


@dataclass
class RawDocument:
    id: str
    text: str
    source: Source = Source.NORMAL

    def __post_init__(self):
        if not self.text:
            raise ValueError(f"document {self.id!r} has empty text")
        self.source = Source(self.source)


@dataclass
class EmbeddedDocument:
    """One document as a (max_sent x embed_dim) matrix plus id and label.

    sentence_count is the number of content rows (capped at max_sent); rows
    at or beyond it are exactly zero.
    """

    id: str
    label: int
    sentence_count: int
    matrix: np.ndarray

    def __post_init__(self):
        if self.label not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.label}")
        self.matrix = np.asarray(self.matrix, dtype=np.float64)
        if self.matrix.ndim != 2:
            raise ValueError(f"matrix must be 2-D, got shape {self.matrix.shape}")
        if not 1 <= self.sentence_count <= self.matrix.shape[0]:
            raise ValueError(
                f"sentence_count {self.sentence_count} out of range for "
                f"{self.matrix.shape[0]} rows")
        if not np.all(np.isfinite(self.matrix)):
            raise ValueError(f"document {self.id!r} has non-finite embeddings")

    @property
    def max_sent(self) -> int:
        return self.matrix.shape[0]

    @property
    def embed_dim(self) -> int:
        return self.matrix.shape[1]

    def pooled(self) -> np.ndarray:
        """Mean of the content (non-padded) rows."""
        return self.matrix[:self.sentence_count].mean(axis=0)


@dataclass
class DatasetSplit:
    train: list[EmbeddedDocument]
    validation: list[EmbeddedDocument]
    test: list[EmbeddedDocument]
    seed: int
    fractions: tuple[float, float, float]

    def partition(self, name: str) -> list[EmbeddedDocument]:
        try:
            return {"train": self.train, "validation": self.validation,
                    "test": self.test}[name]
        except KeyError:
            raise ValueError(f"unknown partition {name!r}") from None


def split_sentences(text: str) -> list[str]:
    """Split at '.', '!' or '?' followed by whitespace or end of text.

    Delimiters are dropped, segments trimmed, empties removed. Text with no
    terminator is returned whole as a single sentence.
    """
    if not text or not text.strip():
        raise ValueError("cannot split empty or whitespace-only text")
    parts = [p.strip() for p in _SENTENCE_BOUNDARY.split(text)]
    sentences = [p for p in parts if p]
    return sentences if sentences else [text.strip()]


def _fnv1a64(data: bytes) -> int:
    h = 0xCBF29CE484222325
    for b in data:
        h ^= b
        h = (h * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
    return h


class EmbeddingProvider:
    """Deterministic sentence -> fixed-length vector boundary."""

    embed_dim: int
    name: str

    def embed(self, sentence: str) -> np.ndarray:
        raise NotImplementedError


def hash_embed(sentence: str, dim: int) -> np.ndarray:
    """Signed feature hashing of lowercase whitespace tokens, L2-normalized.

    The hash is 64-bit FNV-1a: the low bit picks the sign, the remaining bits
    the bucket, so vectors are identical across runs and platforms. An empty
    token set yields the zero vector.
    """
    if dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")
    vec = np.zeros(dim)
    for token in sentence.lower().split():
        h = _fnv1a64(token.encode("utf-8"))
        sign = 1.0 if h & 1 else -1.0
        vec[(h >> 1) % dim] += sign
    norm = np.linalg.norm(vec)
    if norm > 0:
        vec /= norm
    return vec


class HashEmbedder(EmbeddingProvider):
    def __init__(self, embed_dim: int):
        self.embed_dim = embed_dim
        self.name = "hash"

    def embed(self, sentence: str) -> np.ndarray:
        return hash_embed(sentence, self.embed_dim)


class LookupEmbedder(EmbeddingProvider):
    """Provider backed by a precomputed {sentence: vector} table.

    The boundary for externally computed embeddings (e.g. SBERT): vectors are
    produced elsewhere and consumed here by exact sentence string.
    """

    def __init__(self, table: dict[str, np.ndarray], embed_dim: int):
        self.table = {k: np.asarray(v, dtype=np.float64) for k, v in table.items()}
        self.embed_dim = embed_dim
        self.name = "file"

    @classmethod
    def from_file(cls, path: str) -> "LookupEmbedder":
        table: dict[str, np.ndarray] = {}
        dim: int | None = None
        with open(path, encoding="utf-8") as f:
            for i, line in enumerate(f, start=1):
                if not line.strip():
                    continue
                try:
                    rec = json.loads(line)
                    sent, vec = rec["sentence"], rec["vector"]
                except (json.JSONDecodeError, KeyError, TypeError) as exc:
                    raise FormatError(f"bad lookup record: {exc}", path, i) from exc
                if dim is None:
                    dim = len(vec)
                elif len(vec) != dim:
                    raise FormatError(
                        f"vector length {len(vec)} != {dim}", path, i)
                table[sent] = np.asarray(vec, dtype=np.float64)
        if dim is None:
            raise FormatError("lookup file is empty", path)
        return cls(table, dim)

    def embed(self, sentence: str) -> np.ndarray:
        try:
            return self.table[sentence]
        except KeyError:
            raise KeyError(f"sentence not in lookup table: {sentence!r}") from None


def embed_document(doc: RawDocument, provider: EmbeddingProvider,
                   max_sent: int) -> EmbeddedDocument:
    """Embed each sentence into a row; pad with zeros, truncate at max_sent."""
    if max_sent < 1:
        raise ValueError(f"max_sent must be >= 1, got {max_sent}")
    sentences = split_sentences(doc.text)
    kept = sentences[:max_sent]
    matrix = np.zeros((max_sent, provider.embed_dim))
    for i, sent in enumerate(kept):
        row = provider.embed(sent)
        if row.shape != (provider.embed_dim,):
            raise ValueError(
                f"provider {provider.name!r} returned length {row.shape} "
                f"for embed_dim {provider.embed_dim}")
        matrix[i] = row
    label = 1 if doc.source is Source.OUTLIER else 0
    return EmbeddedDocument(id=doc.id, label=label,
                            sentence_count=len(kept), matrix=matrix)


def inject_outliers(normal: list[RawDocument], outlier_pool: list[RawDocument],
                    n_inject: int, seed: int) -> list[RawDocument]:
    """Mix a seeded uniform sample of outliers into the normal corpus, shuffled."""
    if n_inject > len(outlier_pool):
        raise ValueError(
            f"n_inject {n_inject} exceeds outlier pool size {len(outlier_pool)}")
    rng = np.random.default_rng(seed)
    chosen = rng.choice(len(outlier_pool), size=n_inject, replace=False)
    combined = list(normal) + [outlier_pool[i] for i in sorted(chosen)]
    order = rng.permutation(len(combined))
    return [combined[i] for i in order]


def stratified_split(docs: list[EmbeddedDocument],
                     fractions: tuple[float, float, float],
                     seed: int) -> DatasetSplit:
    """Three-way split preserving the class ratio within each partition."""
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError(f"fractions must sum to 1, got {fractions}")
    if any(f < 0 for f in fractions):
        raise ValueError(f"fractions must be non-negative, got {fractions}")
    rng = np.random.default_rng(seed)
    parts: list[list[EmbeddedDocument]] = [[], [], []]
    n_nonzero = sum(1 for f in fractions if f > 0)
    for cls in (0, 1):
        members = [d for d in docs if d.label == cls]
        if not members:
            continue
        if len(members) < n_nonzero:
            raise ValueError(
                f"class {cls} has {len(members)} docs, fewer than the "
                f"{n_nonzero} non-empty partitions")
        order = rng.permutation(len(members))
        members = [members[i] for i in order]
        # largest-remainder allocation so counts sum exactly
        raw = [f * len(members) for f in fractions]
        counts = [int(r) for r in raw]
        rem = len(members) - sum(counts)
        by_frac = sorted(range(3), key=lambda i: raw[i] - counts[i], reverse=True)
        for i in by_frac[:rem]:
            counts[i] += 1
        start = 0
        for i, c in enumerate(counts):
            parts[i].extend(members[start:start + c])
            start += c
    for part in parts:
        order = rng.permutation(len(part))
        part[:] = [part[i] for i in order]
    return DatasetSplit(train=parts[0], validation=parts[1], test=parts[2],
                        seed=seed, fractions=tuple(fractions))


def oversample(items: list[tuple[object, int]], seed: int) -> list[tuple[object, int]]:
    """Duplicate minority-class items (uniformly, with replacement) until the
    class counts are equal; the result is shuffled."""
    labels = {lbl for _, lbl in items}
    if labels != {0, 1}:
        raise ValueError(f"oversample needs both classes present, got labels {labels}")
    by_class = {0: [it for it in items if it[1] == 0],
                1: [it for it in items if it[1] == 1]}
    minority = 0 if len(by_class[0]) < len(by_class[1]) else 1
    deficit = abs(len(by_class[0]) - len(by_class[1]))
    rng = np.random.default_rng(seed)
    extra = [by_class[minority][i]
             for i in rng.integers(0, len(by_class[minority]), size=deficit)]
    out = list(items) + extra
    order = rng.permutation(len(out))
    return [out[i] for i in order]


def _fmt_real(x: float) -> float:
    # json round-trips python floats losslessly (repr is shortest round-trip,
    # <= 17 significant digits)
    return float(x)


def write_embeddings(docs: list[EmbeddedDocument], path: str,
                     max_sent: int | None = None) -> None:
    if not docs and max_sent is None:
        raise ValueError("max_sent is required when writing an empty file")
    if max_sent is None:
        max_sent = docs[0].max_sent
    embed_dim = docs[0].embed_dim if docs else 0
    with open(path, "w", encoding="utf-8") as f:
        header = {"format": FORMAT_NAME, "version": FORMAT_VERSION,
                  "embed_dim": embed_dim, "max_sent": max_sent}
        f.write(json.dumps(header) + "\n")
        for doc in docs:
            rows = doc.matrix[:doc.sentence_count]
            rec = {"id": doc.id, "label": doc.label,
                   "sentences": [[_fmt_real(v) for v in row] for row in rows]}
            f.write(json.dumps(rec) + "\n")


def read_embeddings(path: str) -> tuple[list[EmbeddedDocument], dict]:
    """Load the canonical embedding file; returns (docs, header).

    Truncates to the header's max_sent and zero-pads shorter documents.
    """
    with open(path, encoding="utf-8") as f:
        first = f.readline()
        if not first.strip():
            return [], {"format": FORMAT_NAME, "version": FORMAT_VERSION,
                        "embed_dim": 0, "max_sent": 0}
        try:
            header = json.loads(first)
        except json.JSONDecodeError as exc:
            raise FormatError(f"unreadable header: {exc}", path, 1) from exc
        if header.get("format") != FORMAT_NAME:
            raise FormatError(
                f"not a {FORMAT_NAME} file (format={header.get('format')!r})",
                path, 1)
        if header.get("version") != FORMAT_VERSION:
            raise FormatError(
                f"unsupported version {header.get('version')!r}", path, 1)
        embed_dim = header.get("embed_dim")
        max_sent = header.get("max_sent")
        if not isinstance(embed_dim, int) or embed_dim < 1:
            raise FormatError(f"bad embed_dim {embed_dim!r}", path, 1)
        if not isinstance(max_sent, int) or max_sent < 1:
            raise FormatError(f"bad max_sent {max_sent!r}", path, 1)
        docs: list[EmbeddedDocument] = []
        seen: set[str] = set()
        for i, line in enumerate(f, start=2):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"malformed document line: {exc}", path, i) from exc
            try:
                doc_id, label, sents = rec["id"], rec["label"], rec["sentences"]
            except (KeyError, TypeError) as exc:
                raise FormatError(f"missing field: {exc}", path, i) from exc
            if label not in (0, 1):
                raise FormatError(f"label must be 0 or 1, got {label!r}", path, i)
            if not isinstance(sents, list) or not sents:
                raise FormatError("'sentences' must be a non-empty list", path, i)
            for row in sents:
                if not isinstance(row, list) or len(row) != embed_dim:
                    raise FormatError(
                        f"row length {len(row) if isinstance(row, list) else '?'} "
                        f"!= header embed_dim {embed_dim}", path, i)
            if doc_id in seen:
                raise FormatError(f"duplicate document id {doc_id!r}", path, i)
            seen.add(doc_id)
            kept = sents[:max_sent]
            matrix = np.zeros((max_sent, embed_dim))
            matrix[:len(kept)] = np.asarray(kept, dtype=np.float64)
            docs.append(EmbeddedDocument(id=doc_id, label=int(label),
                                         sentence_count=len(kept), matrix=matrix))
    return docs, header


def read_raw_corpus(path: str) -> list[RawDocument]:
    """JSON-lines raw corpus: {"id", "text", "source"?} per line."""
    docs: list[RawDocument] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as f:
        for i, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                doc = RawDocument(id=rec["id"], text=rec["text"],
                                  source=rec.get("source", Source.NORMAL))
            except (json.JSONDecodeError, KeyError, ValueError, TypeError) as exc:
                raise FormatError(f"bad raw document: {exc}", path, i) from exc
            if doc.id in seen:
                raise FormatError(f"duplicate document id {doc.id!r}", path, i)
            seen.add(doc.id)
            docs.append(doc)
    return docs


def write_raw_corpus(docs: list[RawDocument], path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for doc in docs:
            f.write(json.dumps({"id": doc.id, "text": doc.text,
                                "source": doc.source.value}) + "\n")
