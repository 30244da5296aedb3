"""Document ingestion: normalization, content hashing, dedup memory.

Text normalization is a fixed five-step pipeline (NFKC, lowercase,
non-alphanumeric to space, collapse whitespace, trim) chosen to be
deterministic and idempotent. Digests are SHA-256 over the UTF-8 bytes of
the normalized text, so identical evidence always collides regardless of
formatting, punctuation, or case differences in the source.
"""

from __future__ import annotations

import hashlib
import json
import unicodedata
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, TYPE_CHECKING

from .errors import DataError, FileMissingError

if TYPE_CHECKING:
    from .graphstore import KnowledgeGraph


def normalize_text(raw: str) -> str:
    """Normalize text for hashing and matching. Idempotent."""
    folded = unicodedata.normalize("NFKC", raw).lower()
    scrubbed = "".join(ch if ch.isalnum() else " " for ch in folded)
    return " ".join(scrubbed.split())


def hash_document(doc_text: str) -> str:
    """SHA-256 hex digest of already-normalized text."""
    return hashlib.sha256(doc_text.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class Document:
    """One literature abstract with its normalized form and content digest."""

    source_id: str
    raw_text: str
    normalized_text: str
    digest: str

    @classmethod
    def from_raw(cls, source_id: str, raw_text: str) -> "Document":
        normalized = normalize_text(raw_text)
        return cls(
            source_id=source_id,
            raw_text=raw_text,
            normalized_text=normalized,
            digest=hash_document(normalized),
        )


@dataclass(frozen=True)
class HashMemory:
    """Monotonic set of seen digests; ``generation`` counts update batches."""

    seen: frozenset[str] = frozenset()
    generation: int = 0


@dataclass(frozen=True)
class SearchQuery:
    text: str
    depth: int = 0


def dedup_batch(
    docs: list[Document], memory: HashMemory
) -> tuple[list[Document], HashMemory]:
    """Drop docs already in ``memory`` and intra-batch repeats (first wins).

    Returns the retained docs in input order plus the grown memory; the
    memory absorbs every digest in the batch, retained or not.
    """
    retained: list[Document] = []
    batch_seen: set[str] = set()
    for doc in docs:
        if doc.digest in memory.seen or doc.digest in batch_seen:
            batch_seen.add(doc.digest)
            continue
        batch_seen.add(doc.digest)
        retained.append(doc)
    return retained, HashMemory(
        seen=memory.seen | batch_seen, generation=memory.generation + 1
    )


def expand_queries(
    graph: "KnowledgeGraph",
    frontier_entities: set[str],
    depth: int,
    max_depth: int,
    issued: frozenset[str] = frozenset(),
) -> list[SearchQuery]:
    """Next wave of search queries from newly canonicalized entities.

    One query per frontier entity whose canonical name was never issued
    before, sorted by name for determinism. Empty once ``depth`` reaches
    ``max_depth``, which bounds the retrieval loop.
    """
    if depth >= max_depth:
        return []
    names = set()
    for entity_id in frontier_entities:
        entity = graph.entities.get(entity_id)
        names.add(entity.canonical_id if entity is not None else entity_id)
    return [
        SearchQuery(text=name, depth=depth + 1)
        for name in sorted(names - set(issued))
    ]


def join_title_abstract(title: str, abstract: str) -> str:
    """Concatenate the optional title and the abstract with a single space."""
    return " ".join(part for part in (title, abstract) if part)


def load_jsonl_corpus(path: str | Path) -> list[Document]:
    """Read a JSON Lines corpus: one object per line with ``id``, optional
    ``title`` and ``abstract``; title and abstract join with a single space.
    """
    path = Path(path)
    if not path.exists():
        raise FileMissingError(f"corpus file not found: {path}")
    docs: list[Document] = []
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"corpus line {lineno} is not valid JSON: {exc}")
            if not isinstance(record, dict) or "id" not in record:
                raise DataError(f"corpus line {lineno} missing 'id' field")
            title = record.get("title", "") or ""
            abstract = record.get("abstract", "") or ""
            docs.append(
                Document.from_raw(str(record["id"]), join_title_abstract(title, abstract))
            )
    return docs


def documents_from_records(records: Iterable[dict]) -> list[Document]:
    """Build Documents from in-memory corpus records (same schema as JSONL)."""
    docs = []
    for record in records:
        title = record.get("title", "") or ""
        abstract = record.get("abstract", "") or ""
        docs.append(Document.from_raw(str(record["id"]), join_title_abstract(title, abstract)))
    return docs
