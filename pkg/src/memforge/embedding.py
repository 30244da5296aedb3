"""Deterministic text embeddings and the long-term-memory bank.

The built-in embedder feature-hashes character 3-grams of the normalized
text: each 3-gram lands in bucket ``sha256(gram) mod d`` with sign taken
from the digest's least-significant bit, and the vector is L2-normalized.
No PRNG is involved, so vectors are bit-exact across platforms and runs.

The memory bank holds one row per graph edge, ordered by edge key, with a
row-to-edge provenance map so activations can be traced back to triples.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, TYPE_CHECKING

import numpy as np

from .corpus import normalize_text
from .errors import DataError, EmptyLTMError, FileMissingError

if TYPE_CHECKING:
    from .graphstore import EdgeKey, KnowledgeGraph


class EmbeddingProvider(Protocol):
    dim: int

    def embed(self, text: str) -> np.ndarray: ...


class HashingEmbedder:
    """Character-3-gram feature hashing into ``dim`` buckets."""

    def __init__(self, dim: int):
        if dim < 2:
            raise DataError(f"embedding dimension must be >= 2, got {dim}")
        self.dim = dim

    def embed(self, text: str) -> np.ndarray:
        normalized = normalize_text(text)
        vec = np.zeros(self.dim, dtype=np.float64)
        for i in range(len(normalized) - 2):
            digest = hashlib.sha256(normalized[i : i + 3].encode("utf-8")).digest()
            value = int.from_bytes(digest, "big")
            sign = 1.0 if value & 1 == 0 else -1.0
            vec[value % self.dim] += sign
        norm = float(np.linalg.norm(vec))
        if norm == 0.0:
            return vec
        return vec / norm


def centroid(vectors: list[np.ndarray]) -> np.ndarray:
    """Arithmetic mean per coordinate; errors on an empty list."""
    if not vectors:
        raise DataError("centroid of an empty vector list is undefined")
    stacked = np.stack(vectors)
    if stacked.ndim != 2:
        raise DataError("centroid inputs must share one dimension")
    return stacked.mean(axis=0)


@dataclass
class MemoryBank:
    """N x d matrix of knowledge embeddings, one row per graph edge."""

    matrix: np.ndarray
    provenance: list["EdgeKey"]
    built_from: str

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]


def render_edge_text(key: "EdgeKey") -> str:
    subject_id, relation, object_id = key
    return f"{subject_id} {relation} {object_id}"


def build_memory_bank(
    graph: "KnowledgeGraph", provider: EmbeddingProvider
) -> MemoryBank:
    """Embed every edge as "subject relation object", rows in edge-key order."""
    if not graph.edges:
        raise EmptyLTMError("empty LTM: graph has no edges to embed")
    keys = sorted(graph.edges)
    matrix = np.zeros((len(keys), provider.dim), dtype=np.float64)
    for i, key in enumerate(keys):
        matrix[i] = provider.embed(render_edge_text(key))
    return MemoryBank(matrix=matrix, provenance=keys, built_from=graph.version_tag())


# --- matrix / bank file formats -------------------------------------------
#
# Binary layout: 8-byte little-endian row count, 8-byte little-endian column
# count, rows * cols little-endian float64 values (row-major), then a UTF-8
# JSON trailer. Projection matrices reuse the same layout with rows == cols.

_HEADER = struct.Struct("<QQ")


def write_matrix(path: str | Path, matrix: np.ndarray, trailer: dict) -> int:
    rows, cols = matrix.shape
    payload = (
        _HEADER.pack(rows, cols)
        + np.ascontiguousarray(matrix, dtype="<f8").tobytes()
        + json.dumps(trailer, sort_keys=True, separators=(",", ":")).encode("utf-8")
    )
    Path(path).write_bytes(payload)
    return len(payload)


def read_matrix(path: str | Path) -> tuple[np.ndarray, dict]:
    path = Path(path)
    if not path.exists():
        raise FileMissingError(f"matrix file not found: {path}")
    blob = path.read_bytes()
    if len(blob) < _HEADER.size:
        raise DataError(f"matrix file truncated: {path}")
    rows, cols = _HEADER.unpack_from(blob)
    body_end = _HEADER.size + rows * cols * 8
    if len(blob) < body_end:
        raise DataError(f"matrix file truncated: {path}")
    matrix = np.frombuffer(
        blob, dtype="<f8", count=rows * cols, offset=_HEADER.size
    ).reshape(rows, cols).astype(np.float64)
    try:
        trailer = json.loads(blob[body_end:].decode("utf-8")) if blob[body_end:] else {}
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise DataError(f"matrix trailer unreadable: {exc}")
    return matrix, trailer


def write_bank(bank: MemoryBank, path: str | Path) -> int:
    trailer = {
        "built_from": bank.built_from,
        "provenance": [list(key) for key in bank.provenance],
    }
    return write_matrix(path, bank.matrix, trailer)


def read_bank(path: str | Path) -> MemoryBank:
    matrix, trailer = read_matrix(path)
    provenance = [tuple(item) for item in trailer.get("provenance", [])]
    if len(provenance) != matrix.shape[0]:
        raise DataError("bank provenance does not match row count")
    return MemoryBank(
        matrix=matrix,
        provenance=provenance,
        built_from=str(trailer.get("built_from", "")),
    )


def write_bank_json(bank: MemoryBank, path: str | Path) -> int:
    """Plain-JSON bank dump for debugging; larger but human-readable."""
    doc = {
        "rows": bank.size,
        "dim": bank.dim,
        "built_from": bank.built_from,
        "matrix": [[float(x) for x in row] for row in bank.matrix],
        "provenance": [list(key) for key in bank.provenance],
    }
    payload = json.dumps(doc, sort_keys=True, separators=(",", ":")).encode("utf-8")
    Path(path).write_bytes(payload)
    return len(payload)


def load_projection(path: str | Path, dim: int) -> np.ndarray:
    """Load a d x d projection from the matrix binary format."""
    matrix, _ = read_matrix(path)
    if matrix.shape != (dim, dim):
        raise DataError(
            f"projection shape {matrix.shape} does not match dimension {dim}"
        )
    return matrix
