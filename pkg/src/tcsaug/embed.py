"""Embedding providers behind one store contract.

Three provenances: a deterministic toy embedder (signed hashed bag of
tokens, unit-normalized) that computes on miss, a read-only store loaded
from a response file, and a file-exchange adapter bridge (write a request
file, wait for a response file produced by an external embedding process).

Texts are keyed by a sha256 content hash so repeated texts (topics repeat
heavily across evaluation instances) are embedded once.
"""

from __future__ import annotations

import hashlib
import re
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import InputError, MissingEmbeddingError, ProtocolError
from .lineio import read_records, sha256_text, write_records

_TOKEN_RE = re.compile(r"[a-z0-9]+")

REQUEST_FILENAME = "request.jsonl"
RESPONSE_FILENAME = "response.jsonl"


def text_key(text: str) -> str:
    """Content-hash key under which a text's vector is stored."""
    return sha256_text(text)


@dataclass(frozen=True)
class EmbeddingVector:
    key: str
    dim: int
    values: tuple[float, ...]

    def __post_init__(self):
        if len(self.values) != self.dim:
            raise InputError(f"vector for {self.key} has {len(self.values)} values, declared dim {self.dim}")

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=np.float64)


def toy_embed(text: str, dim: int) -> EmbeddingVector:
    """Deterministic signed hashed bag-of-tokens embedding, L2-normalized.

    Tokens are lowercase non-alphanumeric-separated runs. Each token's
    sha256 selects an index (first 8 digest bytes, big-endian, mod dim)
    and a sign (low bit of digest byte 8). Accumulation then normalization
    makes the result order-insensitive and invariant to pure repetition.
    An empty token set yields the zero vector, which downstream cosine
    rejects rather than silently scoring.
    """
    if dim < 8:
        raise InputError(f"toy embedder dim must be >= 8, got {dim}")
    acc = np.zeros(dim, dtype=np.float64)
    for token in _TOKEN_RE.findall(text.lower()):
        digest = hashlib.sha256(token.encode("utf-8")).digest()
        index = int.from_bytes(digest[:8], "big") % dim
        sign = 1.0 if digest[8] & 1 == 0 else -1.0
        acc[index] += sign
    norm = float(np.linalg.norm(acc))
    if norm > 0.0:
        acc /= norm
    return EmbeddingVector(text_key(text), dim, tuple(float(x) for x in acc))


@dataclass
class EmbeddingStore:
    """Immutable-after-load vector store; toy provenance computes on miss."""

    dim: int
    provenance: str  # "toy" | "external-file" | "adapter"
    vectors: dict[str, EmbeddingVector] = field(default_factory=dict)

    def add(self, vector: EmbeddingVector) -> None:
        if vector.dim != self.dim:
            raise ProtocolError(f"vector dim {vector.dim} does not match store dim {self.dim}")
        self.vectors[vector.key] = vector

    def lookup(self, text: str) -> EmbeddingVector:
        key = text_key(text)
        hit = self.vectors.get(key)
        if hit is not None:
            return hit
        if self.provenance == "toy":
            vector = toy_embed(text, self.dim)
            self.vectors[key] = vector
            return vector
        raise MissingEmbeddingError(key)


def make_toy_store(dim: int) -> EmbeddingStore:
    if dim < 8:
        raise InputError(f"toy embedder dim must be >= 8, got {dim}")
    return EmbeddingStore(dim=dim, provenance="toy")


def write_request_file(texts: Sequence[str], path: str | Path) -> list[str]:
    """Write the embedding request file; returns the deduplicated keys in order."""
    seen: dict[str, str] = {}
    for text in texts:
        key = text_key(text)
        if key not in seen:
            seen[key] = text
    write_records(path, [{"key": k, "text": t} for k, t in seen.items()])
    return list(seen)


def read_response_file(path: str | Path, provenance: str = "external-file") -> EmbeddingStore:
    """Load a response file ({key, dim, values} lines) into a store."""
    store: EmbeddingStore | None = None
    for line_no, record in read_records(path):
        try:
            key, dim, values = record["key"], int(record["dim"]), record["values"]
        except (KeyError, TypeError, ValueError) as exc:
            raise ProtocolError(f"{path}:{line_no}: bad response record: {exc}") from exc
        if not isinstance(values, list):
            raise ProtocolError(f"{path}:{line_no}: values must be a list of reals")
        if store is None:
            store = EmbeddingStore(dim=dim, provenance=provenance)
        if dim != store.dim:
            raise ProtocolError(f"{path}:{line_no}: dim {dim} conflicts with earlier dim {store.dim}")
        store.add(EmbeddingVector(key, dim, tuple(float(v) for v in values)))
    if store is None:
        raise ProtocolError(f"{path}: response file is empty")
    return store


def write_response_file(vectors: Iterable[EmbeddingVector], path: str | Path) -> None:
    write_records(path, [{"key": v.key, "dim": v.dim, "values": list(v.values)} for v in vectors])


def request_embeddings(
    texts: Sequence[str],
    exchange_dir: str | Path,
    *,
    timeout_s: float = 0.0,
    poll_interval_s: float = 0.1,
) -> EmbeddingStore:
    """File-exchange bridge: write request.jsonl, wait for response.jsonl.

    Validates that every requested key is answered with a consistent dim.
    A missing or late response file, missing keys, and dim mismatches all
    raise ProtocolError.
    """
    exchange_dir = Path(exchange_dir)
    exchange_dir.mkdir(parents=True, exist_ok=True)
    requested = write_request_file(texts, exchange_dir / REQUEST_FILENAME)

    response_path = exchange_dir / RESPONSE_FILENAME
    deadline = time.monotonic() + timeout_s
    while not response_path.exists():
        if time.monotonic() >= deadline:
            raise ProtocolError(f"no response file at {response_path} after {timeout_s}s")
        time.sleep(poll_interval_s)

    store = read_response_file(response_path, provenance="adapter")
    missing = [k for k in requested if k not in store.vectors]
    if missing:
        raise ProtocolError(f"response missing {len(missing)} requested keys: {', '.join(missing[:5])}")
    return store
