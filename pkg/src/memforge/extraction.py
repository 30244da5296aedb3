"""Candidate-triple extraction from documents and confidence filtering.

Two extractor providers implement the same contract (document in, evidence
triples out): a deterministic pattern-matching mock used for tests and
offline pipelines, and a remote LLM-backed extractor speaking a strict
JSON request/response schema. Triple embeddings are always recomputed
locally over the rendered "subject relation object" text so they live in
the same space as the memory bank regardless of provider.
"""

from __future__ import annotations

import json
import os
import re
from dataclasses import dataclass, field

import numpy as np

from .corpus import Document, normalize_text
from .embedding import EmbeddingProvider
from .errors import ConfigError, ExtractionFailedError

DEFAULT_RELATIONS = (
    "EXHIBITS_FEATURE",
    "ASSOCIATED_WITH",
    "INDICATES",
    "GRADED_AS",
    "LOCATED_IN",
)

LLM_API_KEY_ENV = "MEMFORGE_LLM_API_KEY"

_SENTENCE_SPLIT = re.compile(r"[.!?\n]+")

# (normalized pattern, relation, confidence); tried in order, first match
# per sentence emits one triple.
_MOCK_RULES = (
    (" shows ", "EXHIBITS_FEATURE", 0.9),
    (" is associated with ", "ASSOCIATED_WITH", 0.8),
    (" indicates ", "INDICATES", 0.85),
)


@dataclass(frozen=True)
class RelationSchema:
    relations: tuple[str, ...] = DEFAULT_RELATIONS

    def __post_init__(self):
        if not self.relations:
            raise ConfigError("relation schema must not be empty")
        if len(set(self.relations)) != len(self.relations):
            raise ConfigError("relation schema names must be unique")

    def __contains__(self, relation: str) -> bool:
        return relation in self.relations


@dataclass
class EvidenceTriple:
    """A single-source candidate fact with confidence and embedding."""

    subject: str
    relation: str
    object: str
    confidence: float
    embedding: np.ndarray
    source_digest: str

    def render(self) -> str:
        return f"{self.subject} {self.relation} {self.object}"


def render_triple_text(subject: str, relation: str, obj: str) -> str:
    return f"{subject} {relation} {obj}"


def filter_by_confidence(
    triples: list[EvidenceTriple], tau: float
) -> list[EvidenceTriple]:
    """Keep triples with confidence >= tau (inclusive), order preserved."""
    if not 0.0 < tau < 1.0:
        raise ConfigError(f"confidence threshold must be in (0,1), got {tau}")
    return [t for t in triples if t.confidence >= tau]


class MockExtractor:
    """Deterministic stand-in extractor driven by sentence patterns.

    Sentences are split on the original text's boundaries, then normalized
    individually; the first matching rule per sentence emits a triple whose
    subject/object are the maximal spans flanking the pattern.
    """

    def __init__(self, schema: RelationSchema, embedder: EmbeddingProvider):
        self.schema = schema
        self.embedder = embedder

    def extract(self, doc: Document) -> list[EvidenceTriple]:
        triples: list[EvidenceTriple] = []
        for sentence in _SENTENCE_SPLIT.split(doc.raw_text):
            normalized = normalize_text(sentence)
            if not normalized:
                continue
            for pattern, relation, confidence in _MOCK_RULES:
                subject, sep, obj = normalized.partition(pattern)
                if not sep or not subject or not obj:
                    continue
                if relation not in self.schema:
                    break
                triples.append(
                    EvidenceTriple(
                        subject=subject,
                        relation=relation,
                        object=obj,
                        confidence=confidence,
                        embedding=self.embedder.embed(
                            render_triple_text(subject, relation, obj)
                        ),
                        source_digest=doc.digest,
                    )
                )
                break
        return triples


@dataclass
class RemoteEndpoint:
    """Connection descriptor for the remote LLM extractor API."""

    url: str
    timeout: float = 30.0
    max_retries: int = 3
    api_key_env: str = LLM_API_KEY_ENV


@dataclass
class ExtractionStats:
    dropped_items: int = 0
    failed_docs: list[str] = field(default_factory=list)


class RemoteExtractor:
    """LLM-backed extractor over HTTP.

    Request body: ``{"text": <abstract>, "relations": [<schema>]}``;
    response: ``{"triples": [{"s", "r", "o", "c"}]}``. Malformed items and
    relations outside the schema are dropped and counted; transport errors
    and unparseable responses retry up to ``max_retries`` before the
    document is marked extraction-failed.
    """

    def __init__(
        self,
        schema: RelationSchema,
        embedder: EmbeddingProvider,
        endpoint: RemoteEndpoint,
        transport=None,
    ):
        import httpx

        self.schema = schema
        self.embedder = embedder
        self.endpoint = endpoint
        self.stats = ExtractionStats()
        headers = {}
        api_key = os.environ.get(endpoint.api_key_env)
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        self._client = httpx.Client(
            timeout=endpoint.timeout, headers=headers, transport=transport
        )

    def extract(self, doc: Document) -> list[EvidenceTriple]:
        import httpx

        body = {"text": doc.raw_text, "relations": list(self.schema.relations)}
        last_error = "no attempt made"
        for _ in range(max(1, self.endpoint.max_retries)):
            try:
                response = self._client.post(self.endpoint.url, json=body)
                response.raise_for_status()
                payload = response.json()
                items = payload["triples"]
                if not isinstance(items, list):
                    raise ValueError("'triples' is not a list")
            except (httpx.HTTPError, ValueError, KeyError, json.JSONDecodeError) as exc:
                last_error = f"{type(exc).__name__}: {exc}"
                continue
            return self._parse_items(items, doc)
        self.stats.failed_docs.append(doc.digest)
        raise ExtractionFailedError(
            f"extraction failed for document {doc.source_id}: {last_error}"
        )

    def _parse_items(self, items: list, doc: Document) -> list[EvidenceTriple]:
        triples: list[EvidenceTriple] = []
        for item in items:
            if not self._valid_item(item):
                self.stats.dropped_items += 1
                continue
            subject = item["s"].strip()
            obj = item["o"].strip()
            triples.append(
                EvidenceTriple(
                    subject=subject,
                    relation=item["r"],
                    object=obj,
                    confidence=float(item["c"]),
                    embedding=self.embedder.embed(
                        render_triple_text(subject, item["r"], obj)
                    ),
                    source_digest=doc.digest,
                )
            )
        return triples

    def _valid_item(self, item) -> bool:
        if not isinstance(item, dict):
            return False
        if not all(isinstance(item.get(k), str) for k in ("s", "r", "o")):
            return False
        if not item["s"].strip() or not item["o"].strip():
            return False
        if item["r"] not in self.schema:
            return False
        confidence = item.get("c")
        if not isinstance(confidence, (int, float)) or isinstance(confidence, bool):
            return False
        return 0.0 <= float(confidence) <= 1.0
