"""Synthetic-corpus evaluation: plant disease-feature facts among
distractors, rebuild the memory end to end, and measure recall of the
planted facts under a sweep of per-mode activation caps.

Each generated document carries exactly one extractable sentence. Entity
names are composed from a syllable pool under a seeded RNG, so a fixed
seed reproduces the corpus, the graph, and the sweep byte for byte.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from itertools import product

from .activation import (
    ActivationConfig,
    adaptive_select,
    compute_query,
    dynamic_activate,
    static_activate,
)
from .config import PipelineConfig
from .corpus import documents_from_records
from .embedding import build_memory_bank
from .graphstore import EdgeKey
from .pipeline import build_from_documents, make_embedder

_SYLLABLES = (
    "ba", "ce", "di", "fo", "gu", "ha", "ki", "lo", "mu", "ne",
    "pa", "qui", "ro", "sa", "tu", "ve", "wi", "xo", "yu", "ze",
)

_DISTRACTOR_TEMPLATES = (
    "{a} shows {b}.",
    "{a} is associated with {b}.",
    "{a} indicates {b}.",
)


@dataclass(frozen=True)
class PlantedFact:
    disease: str
    feature: str

    @property
    def edge_key(self) -> EdgeKey:
        return (self.disease, "EXHIBITS_FEATURE", self.feature)


def _draw_name(rng: random.Random, taken: set[str]) -> str:
    while True:
        name = "".join(rng.choice(_SYLLABLES) for _ in range(3))
        if name not in taken:
            taken.add(name)
            return name


def generate_synthetic_corpus(
    n_planted: int, n_distractors: int, seed: int
) -> tuple[list[dict], list[PlantedFact]]:
    """Corpus records (JSONL schema) with ``n_planted`` disease-feature
    facts followed by ``n_distractors`` unrelated facts."""
    rng = random.Random(seed)
    taken: set[str] = set()
    records: list[dict] = []
    planted: list[PlantedFact] = []
    for i in range(n_planted):
        fact = PlantedFact(
            disease=_draw_name(rng, taken), feature=_draw_name(rng, taken)
        )
        planted.append(fact)
        records.append(
            {
                "id": f"planted{i:04d}",
                "abstract": f"{fact.disease} shows {fact.feature}.",
            }
        )
    for i in range(n_distractors):
        template = _DISTRACTOR_TEMPLATES[i % len(_DISTRACTOR_TEMPLATES)]
        sentence = template.format(
            a=_draw_name(rng, taken), b=_draw_name(rng, taken)
        )
        records.append({"id": f"distractor{i:04d}", "abstract": sentence})
    return records, planted


@dataclass
class SweepRow:
    cap_dynamic: int
    cap_static: int
    recall: float
    mean_score: float


def run_cap_sweep(
    records: list[dict],
    planted: list[PlantedFact],
    config: PipelineConfig,
    max_cap: int = 5,
) -> list[SweepRow]:
    """Recall@caps for every (dynamic, static) cap pair in 1..max_cap.

    A planted fact counts as recalled when its edge appears in the fused
    selection for a query made of its feature text alone; mean_score
    averages the matched edges' fused scores over the hits.
    """
    graph, _ = build_from_documents(documents_from_records(records), config)
    embedder = make_embedder(config)
    bank = build_memory_bank(graph, embedder)
    queries = [
        (fact.edge_key, compute_query(embedder.embed(fact.feature)[None, :], config.epsilon))
        for fact in planted
    ]
    rows: list[SweepRow] = []
    for cap_d, cap_s in product(range(1, max_cap + 1), repeat=2):
        activation_config = ActivationConfig(
            epsilon=config.epsilon,
            cap_dynamic=cap_d,
            cap_static=cap_s,
            relevance_floor=config.relevance_floor,
        )
        hits = 0
        hit_scores: list[float] = []
        for edge_key, q in queries:
            fused = adaptive_select(
                static_activate(bank, q, cap_s),
                dynamic_activate(bank, q, activation_config),
                activation_config,
            )
            for position, index in enumerate(fused.indices):
                if fused.provenance[index] == edge_key:
                    hits += 1
                    hit_scores.append(float(fused.scores[position]))
                    break
        recall = hits / len(planted) if planted else 0.0
        mean_score = sum(hit_scores) / len(hit_scores) if hit_scores else 0.0
        rows.append(SweepRow(cap_d, cap_s, recall, mean_score))
    return rows


def sweep_to_csv(rows: list[SweepRow]) -> str:
    lines = ["cap_D,cap_S,recall,mean_score"]
    for row in rows:
        lines.append(
            f"{row.cap_dynamic},{row.cap_static},{row.recall},{row.mean_score}"
        )
    return "\n".join(lines) + "\n"
