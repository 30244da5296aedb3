"""The long-term-memory graph: canonical entities, fused-weight edges,
surface-form map (phi), and feature-inverted index (psi).

Edges are keyed by (subject, relation, object) after canonicalization;
distinct relations between the same endpoints are distinct edges. Each
edge keeps its full evidence list and a weight fused by noisy-or with a
per-evidence attenuation of alpha * confidence * exp(-F * ||z - zbar||^2),
where zbar is the arithmetic centroid of the edge's evidence embeddings.
Corroboration from multiple sources raises the weight toward (never to) 1;
embedding inconsistency damps each source's contribution.

Mutation is single-writer: upserts are not thread-safe, while lookups and
snapshots only read. Every upsert recomputes the fused weight from the
full evidence list because appending evidence moves the centroid.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corpus import normalize_text
from .errors import (
    CanonicalizationError,
    DataError,
    FileMissingError,
    SnapshotCorruptError,
    SnapshotVersionError,
)
from .extraction import EvidenceTriple

SNAPSHOT_VERSION = 1

EdgeKey = tuple[str, str, str]

ENTITY_DISEASE = "Disease"
ENTITY_FEATURE = "Feature"
ENTITY_OTHER = "Other"


@dataclass
class Entity:
    canonical_id: str
    surface_forms: set[str] = field(default_factory=set)
    entity_type: str = ENTITY_FEATURE


@dataclass
class Evidence:
    confidence: float
    embedding: np.ndarray
    source_digest: str

    def to_dict(self) -> dict:
        return {
            "confidence": self.confidence,
            "embedding": [float(x) for x in self.embedding],
            "source_digest": self.source_digest,
        }


@dataclass
class Edge:
    subject_id: str
    relation: str
    object_id: str
    fused_weight: float
    evidence: list[Evidence]

    @property
    def key(self) -> EdgeKey:
        return (self.subject_id, self.relation, self.object_id)


def canonicalize_entity(surface: str, synonym_table: dict[str, str]) -> str:
    """Map a surface form to its canonical id.

    Normalizes, then looks the normalized form up in the synonym table
    (exact match); absent an entry the normalized form is its own canonical
    id. Surfaces that normalize to nothing are rejected.
    """
    normalized = normalize_text(surface)
    if not normalized:
        raise CanonicalizationError(
            f"surface form {surface!r} is empty after normalization"
        )
    return synonym_table.get(normalized, normalized)


def fuse_edge_weight(
    evidence: list[Evidence], alpha: float, penalty_f: float
) -> float:
    """Noisy-or fusion of an edge's evidence list.

    weight = 1 - prod_k (1 - alpha * c_k * exp(-F * ||z_k - zbar||^2)),
    zbar the arithmetic mean of the evidence embeddings. Symmetric in the
    evidence order, strictly below 1, and monotone in appended evidence.
    """
    if not evidence:
        raise DataError("an edge cannot exist without evidence")
    if not 0.0 < alpha <= 1.0:
        raise DataError(f"alpha must be in (0,1], got {alpha}")
    if penalty_f <= 0.0:
        raise DataError(f"penalty coefficient must be > 0, got {penalty_f}")
    if len(evidence) == 1:
        # zbar equals the single embedding, so the penalty term is exactly 1
        return float(alpha * evidence[0].confidence)
    stacked = np.stack([ev.embedding for ev in evidence])
    zbar = stacked.mean(axis=0)
    sq_dist = ((stacked - zbar) ** 2).sum(axis=1)
    confidences = np.array([ev.confidence for ev in evidence])
    factors = 1.0 - alpha * confidences * np.exp(-penalty_f * sq_dist)
    return float(1.0 - np.prod(factors))


@dataclass
class KnowledgeGraph:
    """Weighted directed multigraph with canonicalization and indexing."""

    alpha: float = 0.9
    penalty_f: float = 1.0
    disease_lexicon: frozenset[str] = frozenset()
    entities: dict[str, Entity] = field(default_factory=dict)
    edges: dict[EdgeKey, Edge] = field(default_factory=dict)
    phi: dict[str, str] = field(default_factory=dict)
    psi: dict[str, set[EdgeKey]] = field(default_factory=dict)

    def version_tag(self) -> str:
        return f"snapshot-v{SNAPSHOT_VERSION}"

    def _entity_type(self, canonical_id: str) -> str:
        return ENTITY_DISEASE if canonical_id in self.disease_lexicon else ENTITY_FEATURE

    def _register(self, surface: str, canonical_id: str) -> Entity:
        normalized = normalize_text(surface)
        entity = self.entities.get(canonical_id)
        if entity is None:
            entity = Entity(
                canonical_id=canonical_id,
                entity_type=self._entity_type(canonical_id),
            )
            self.entities[canonical_id] = entity
        entity.surface_forms.update({normalized, canonical_id})
        self.phi[normalized] = canonical_id
        self.phi.setdefault(canonical_id, canonical_id)
        return entity


def upsert_evidence(
    graph: KnowledgeGraph,
    triple: EvidenceTriple,
    synonym_table: dict[str, str],
) -> KnowledgeGraph:
    """Fold one filtered triple into the graph, refreshing the fused weight.

    Endpoints are canonicalized and registered, evidence is appended to the
    matching canonical edge (created on first sight), and psi is updated
    for both endpoints. Mutates and returns ``graph``.
    """
    subject_id = canonicalize_entity(triple.subject, synonym_table)
    object_id = canonicalize_entity(triple.object, synonym_table)
    graph._register(triple.subject, subject_id)
    graph._register(triple.object, object_id)

    key: EdgeKey = (subject_id, triple.relation, object_id)
    edge = graph.edges.get(key)
    if edge is None:
        edge = Edge(
            subject_id=subject_id,
            relation=triple.relation,
            object_id=object_id,
            fused_weight=0.0,
            evidence=[],
        )
        graph.edges[key] = edge
    edge.evidence.append(
        Evidence(
            confidence=triple.confidence,
            embedding=np.asarray(triple.embedding, dtype=np.float64),
            source_digest=triple.source_digest,
        )
    )
    edge.fused_weight = fuse_edge_weight(edge.evidence, graph.alpha, graph.penalty_f)
    graph.psi.setdefault(subject_id, set()).add(key)
    graph.psi.setdefault(object_id, set()).add(key)
    return graph


@dataclass
class LookupResult:
    edges: list[Edge]
    known: bool


def feature_index_lookup(graph: KnowledgeGraph, feature_id: str) -> LookupResult:
    """All edges where ``feature_id`` is subject or object (psi lookup).

    Unknown ids yield an empty result flagged ``known=False`` rather than
    an error.
    """
    known = feature_id in graph.entities
    keys = sorted(graph.psi.get(feature_id, set()))
    return LookupResult(edges=[graph.edges[k] for k in keys], known=known)


def disease_nodes(graph: KnowledgeGraph) -> set[str]:
    return {
        entity_id
        for entity_id, entity in graph.entities.items()
        if entity.entity_type == ENTITY_DISEASE
    }


# --- snapshot persistence ---------------------------------------------------


def graph_to_dict(graph: KnowledgeGraph) -> dict:
    return {
        "version": SNAPSHOT_VERSION,
        "fusion_params": {"alpha": graph.alpha, "penalty_f": graph.penalty_f},
        "disease_lexicon": sorted(graph.disease_lexicon),
        "entities": [
            {
                "canonical_id": entity.canonical_id,
                "entity_type": entity.entity_type,
                "surface_forms": sorted(entity.surface_forms),
            }
            for entity in (graph.entities[k] for k in sorted(graph.entities))
        ],
        "edges": [
            {
                "subject_id": edge.subject_id,
                "relation": edge.relation,
                "object_id": edge.object_id,
                "fused_weight": edge.fused_weight,
                "evidence": [ev.to_dict() for ev in edge.evidence],
            }
            for edge in (graph.edges[k] for k in sorted(graph.edges))
        ],
        "phi": {k: graph.phi[k] for k in sorted(graph.phi)},
    }


def save_snapshot(graph: KnowledgeGraph, path: str | Path) -> None:
    payload = json.dumps(graph_to_dict(graph), sort_keys=True, indent=2) + "\n"
    Path(path).write_text(payload, encoding="utf-8")


def graph_from_dict(doc: dict) -> KnowledgeGraph:
    version = doc.get("version")
    if not isinstance(version, int):
        raise SnapshotCorruptError("snapshot missing integer 'version' field")
    if version != SNAPSHOT_VERSION:
        raise SnapshotVersionError(
            f"snapshot version {version} not supported (expected {SNAPSHOT_VERSION})"
        )
    try:
        params = doc["fusion_params"]
        graph = KnowledgeGraph(
            alpha=float(params["alpha"]),
            penalty_f=float(params["penalty_f"]),
            disease_lexicon=frozenset(doc["disease_lexicon"]),
        )
        for record in doc["entities"]:
            graph.entities[record["canonical_id"]] = Entity(
                canonical_id=record["canonical_id"],
                surface_forms=set(record["surface_forms"]),
                entity_type=record["entity_type"],
            )
        for record in doc["edges"]:
            edge = Edge(
                subject_id=record["subject_id"],
                relation=record["relation"],
                object_id=record["object_id"],
                fused_weight=float(record["fused_weight"]),
                evidence=[
                    Evidence(
                        confidence=float(ev["confidence"]),
                        embedding=np.array(ev["embedding"], dtype=np.float64),
                        source_digest=ev["source_digest"],
                    )
                    for ev in record["evidence"]
                ],
            )
            if not edge.evidence:
                raise SnapshotCorruptError(f"edge {edge.key} has no evidence")
            if edge.subject_id not in graph.entities or edge.object_id not in graph.entities:
                raise SnapshotCorruptError(f"edge {edge.key} references unknown entity")
            graph.edges[edge.key] = edge
            graph.psi.setdefault(edge.subject_id, set()).add(edge.key)
            graph.psi.setdefault(edge.object_id, set()).add(edge.key)
        graph.phi = dict(doc["phi"])
    except (KeyError, TypeError, ValueError) as exc:
        raise SnapshotCorruptError(f"snapshot structure invalid: {exc}")
    return graph


def load_snapshot(path: str | Path) -> KnowledgeGraph:
    path = Path(path)
    if not path.exists():
        raise FileMissingError(f"snapshot not found: {path}")
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise SnapshotCorruptError(f"snapshot unreadable: {exc}")
    if not isinstance(doc, dict):
        raise SnapshotCorruptError("snapshot root is not an object")
    return graph_from_dict(doc)
