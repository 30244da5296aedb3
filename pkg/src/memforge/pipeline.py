"""End-to-end graph construction: ingest, dedup, extract, filter, upsert,
and the bounded query-expansion loop for live literature search.

Extraction results merge in ascending source-digest order, so the built
graph is identical no matter how the per-document work was scheduled.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

from .config import PipelineConfig
from .corpus import (
    Document,
    HashMemory,
    SearchQuery,
    dedup_batch,
    expand_queries,
    normalize_text,
)
from .embedding import EmbeddingProvider, HashingEmbedder
from .errors import ConfigError, DataError, ExtractionFailedError, FileMissingError
from .extraction import (
    EvidenceTriple,
    MockExtractor,
    RelationSchema,
    RemoteEndpoint,
    RemoteExtractor,
    filter_by_confidence,
)
from .graphstore import KnowledgeGraph, upsert_evidence


class LiteratureClient(Protocol):
    """Anything that can turn a query string into documents."""

    def fetch_documents(self, query: str) -> list[Document]: ...


@dataclass
class BuildReport:
    docs_seen: int = 0
    docs_deduped: int = 0
    docs_retained: int = 0
    triples_extracted: int = 0
    triples_retained: int = 0
    extraction_failures: int = 0
    queries_issued: int = 0
    entities: int = 0
    edges: int = 0

    def to_dict(self) -> dict:
        return {
            "docs_seen": self.docs_seen,
            "docs_deduped": self.docs_deduped,
            "docs_retained": self.docs_retained,
            "triples_extracted": self.triples_extracted,
            "triples_retained": self.triples_retained,
            "extraction_failures": self.extraction_failures,
            "queries_issued": self.queries_issued,
            "entities": self.entities,
            "edges": self.edges,
        }


def load_disease_lexicon(path: str | Path | None) -> frozenset[str]:
    """JSON array of disease names, normalized to canonical form on load."""
    if path is None:
        return frozenset()
    path = Path(path)
    if not path.exists():
        raise FileMissingError(f"disease lexicon not found: {path}")
    try:
        names = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"disease lexicon is not valid JSON: {exc}")
    if not isinstance(names, list):
        raise DataError("disease lexicon must be a JSON array of names")
    return frozenset(normalize_text(str(name)) for name in names) - {""}


def load_synonym_table(path: str | Path | None) -> dict[str, str]:
    """JSON object mapping surface forms to canonical names; both sides
    are normalized on load."""
    if path is None:
        return {}
    path = Path(path)
    if not path.exists():
        raise FileMissingError(f"synonym table not found: {path}")
    try:
        table = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"synonym table is not valid JSON: {exc}")
    if not isinstance(table, dict):
        raise DataError("synonym table must be a JSON object")
    return {
        normalize_text(str(surface)): normalize_text(str(canonical))
        for surface, canonical in table.items()
        if normalize_text(str(surface)) and normalize_text(str(canonical))
    }


def make_embedder(config: PipelineConfig) -> HashingEmbedder:
    return HashingEmbedder(config.dim)


def make_extractor(config: PipelineConfig, embedder: EmbeddingProvider):
    schema = RelationSchema()
    if config.extractor == "mock":
        return MockExtractor(schema, embedder)
    if not config.remote_endpoint:
        raise ConfigError("extractor 'remote' requires remote_endpoint in config")
    return RemoteExtractor(schema, embedder, RemoteEndpoint(url=config.remote_endpoint))


@dataclass
class GraphBuilder:
    """Stateful build driver shared by the batch and search entry points."""

    config: PipelineConfig
    extractor: object
    synonym_table: dict[str, str]
    graph: KnowledgeGraph
    memory: HashMemory = field(default_factory=HashMemory)
    report: BuildReport = field(default_factory=BuildReport)

    def ingest_batch(self, docs: list[Document]) -> set[str]:
        """Run one batch through dedup, extraction, filtering, and upserts.
        Returns canonical ids of entities first seen in this batch."""
        self.report.docs_seen += len(docs)
        retained, self.memory = dedup_batch(docs, self.memory)
        self.report.docs_deduped += len(docs) - len(retained)
        self.report.docs_retained += len(retained)

        triples: list[EvidenceTriple] = []
        for doc in sorted(retained, key=lambda d: d.digest):
            try:
                triples.extend(self.extractor.extract(doc))
            except ExtractionFailedError:
                self.report.extraction_failures += 1
        self.report.triples_extracted += len(triples)

        kept = filter_by_confidence(triples, self.config.tau)
        self.report.triples_retained += len(kept)

        known_before = set(self.graph.entities)
        for triple in kept:
            upsert_evidence(self.graph, triple, self.synonym_table)
        return set(self.graph.entities) - known_before

    def finalize(self) -> BuildReport:
        self.report.entities = len(self.graph.entities)
        self.report.edges = len(self.graph.edges)
        return self.report


def new_builder(config: PipelineConfig, embedder: EmbeddingProvider | None = None) -> GraphBuilder:
    embedder = embedder or make_embedder(config)
    return GraphBuilder(
        config=config,
        extractor=make_extractor(config, embedder),
        synonym_table=load_synonym_table(config.synonym_table),
        graph=KnowledgeGraph(
            alpha=config.alpha,
            penalty_f=config.penalty_f,
            disease_lexicon=load_disease_lexicon(config.disease_lexicon),
        ),
    )


def build_from_documents(
    docs: list[Document], config: PipelineConfig
) -> tuple[KnowledgeGraph, BuildReport]:
    builder = new_builder(config)
    builder.ingest_batch(docs)
    return builder.graph, builder.finalize()


def build_from_search(
    seed_query: str, client: LiteratureClient, config: PipelineConfig
) -> tuple[KnowledgeGraph, BuildReport]:
    """Breadth-bounded retrieval loop: issue the seed query, ingest, expand
    queries from newly canonicalized entities, repeat until the depth cap
    or the global query budget stops it.
    """
    builder = new_builder(config)
    issued: set[str] = set()
    pending = [SearchQuery(text=seed_query, depth=0)]
    while pending:
        query = pending.pop(0)
        name = normalize_text(query.text)
        if name in issued or builder.report.queries_issued >= config.query_budget:
            continue
        issued.add(name)
        builder.report.queries_issued += 1
        frontier = builder.ingest_batch(client.fetch_documents(query.text))
        pending.extend(
            expand_queries(
                builder.graph,
                frontier,
                query.depth,
                config.max_depth,
                issued=frozenset(issued),
            )
        )
    return builder.graph, builder.finalize()


def graph_stats(graph: KnowledgeGraph) -> dict:
    """Deterministic summary counts plus a 10-bin fused-weight histogram."""
    histogram = [0] * 10
    for edge in graph.edges.values():
        histogram[min(int(edge.fused_weight * 10), 9)] += 1
    from .graphstore import disease_nodes

    return {
        "entities": len(graph.entities),
        "edges": len(graph.edges),
        "evidence_total": sum(len(e.evidence) for e in graph.edges.values()),
        "diseases": len(disease_nodes(graph)),
        "surface_forms": len(graph.phi),
        "weight_histogram": histogram,
    }
