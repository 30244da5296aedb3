"""Service operations behind the HTTP routes.

Each handler takes a request model and returns a response model; the
FastAPI routes and the CLI's in-process mode both call these directly.
"""

from __future__ import annotations

import numpy as np

from ..activation import (
    ActivationConfig,
    adaptive_select,
    assemble_augmented,
    compute_query,
    dynamic_activate,
    mask_from_indices,
    static_activate,
)
from ..corpus import documents_from_records, load_jsonl_corpus
from ..embedding import (
    build_memory_bank,
    load_projection,
    write_bank,
    write_bank_json,
)
from ..errors import ConfigError, DimensionMismatchError
from ..evaluation import generate_synthetic_corpus, run_cap_sweep, sweep_to_csv
from ..graphstore import load_snapshot, save_snapshot
from ..pipeline import (
    build_from_documents,
    build_from_search,
    graph_stats,
    make_embedder,
)
from .schemas import (
    ActivateRequest,
    ActivateResponse,
    ActivationEntry,
    BuildRequest,
    BuildResponse,
    EvalRequest,
    EvalResponse,
    EvalRow,
    ExportBankRequest,
    ExportBankResponse,
    StatsRequest,
    StatsResponse,
)


def handle_build(request: BuildRequest, client=None) -> BuildResponse:
    sources = [
        request.corpus_path is not None,
        request.documents is not None,
        request.seed_query is not None,
    ]
    if sum(sources) != 1:
        raise ConfigError(
            "exactly one of corpus_path, documents, or seed_query is required"
        )
    if request.seed_query is not None:
        if client is None:
            from ..pubmed import PubMedClient

            client = PubMedClient()
        graph, report = build_from_search(request.seed_query, client, request.config)
    else:
        if request.corpus_path is not None:
            docs = load_jsonl_corpus(request.corpus_path)
        else:
            docs = documents_from_records(
                [d.model_dump() for d in request.documents or []]
            )
        graph, report = build_from_documents(docs, request.config)
    save_snapshot(graph, request.snapshot_path)
    return BuildResponse(snapshot_path=request.snapshot_path, report=report.to_dict())


def handle_activate(request: ActivateRequest) -> ActivateResponse:
    if (request.query_text is None) == (request.tokens is None):
        raise ConfigError("exactly one of query_text or tokens is required")
    config = request.config
    graph = load_snapshot(request.snapshot_path)
    embedder = make_embedder(config)
    bank = build_memory_bank(graph, embedder)

    if request.query_text is not None:
        tokens = embedder.embed(request.query_text)[None, :]
    else:
        tokens = np.asarray(request.tokens, dtype=np.float64)
        if tokens.ndim != 2 or tokens.shape[1] != bank.dim:
            raise DimensionMismatchError(
                f"token matrix shape {tokens.shape} does not match d={bank.dim}"
            )

    activation_config = ActivationConfig(
        epsilon=config.epsilon,
        cap_dynamic=config.cap_dynamic,
        cap_static=config.cap_static,
        mask=(
            mask_from_indices(bank.size, request.masked_indices)
            if request.masked_indices
            else None
        ),
        projection_query=(
            load_projection(request.projection_query_path, bank.dim)
            if request.projection_query_path
            else None
        ),
        projection_memory=(
            load_projection(request.projection_memory_path, bank.dim)
            if request.projection_memory_path
            else None
        ),
        relevance_floor=config.relevance_floor,
    )
    q = compute_query(tokens, config.epsilon)
    fused = adaptive_select(
        static_activate(bank, q, config.cap_static),
        dynamic_activate(bank, q, activation_config),
        activation_config,
    )
    augmented = assemble_augmented(fused, tokens)

    entries = []
    for position, index in enumerate(fused.indices):
        subject, relation, obj = fused.provenance[index]
        entries.append(
            ActivationEntry(
                index=index,
                score=float(fused.scores[position]),
                subject=subject,
                relation=relation,
                object=obj,
                triple=f"{subject} {relation} {obj}",
            )
        )
    return ActivateResponse(
        mode=fused.mode,
        degenerate=fused.degenerate,
        bank_rows=bank.size,
        dim=bank.dim,
        indices=list(fused.indices),
        scores=[float(s) for s in fused.scores],
        entries=entries,
        augmented_rows=augmented.shape[0],
        wm_rows=(
            [[float(x) for x in row] for row in fused.wm_rows]
            if request.include_rows
            else None
        ),
    )


def handle_stats(request: StatsRequest) -> StatsResponse:
    return StatsResponse(**graph_stats(load_snapshot(request.snapshot_path)))


def handle_eval(request: EvalRequest) -> EvalResponse:
    records, planted = generate_synthetic_corpus(
        request.planted, request.distractors, request.seed
    )
    rows = run_cap_sweep(records, planted, request.config, request.max_cap)
    return EvalResponse(
        rows=[
            EvalRow(
                cap_D=row.cap_dynamic,
                cap_S=row.cap_static,
                recall=row.recall,
                mean_score=row.mean_score,
            )
            for row in rows
        ],
        csv=sweep_to_csv(rows),
    )


def handle_export_bank(request: ExportBankRequest) -> ExportBankResponse:
    graph = load_snapshot(request.snapshot_path)
    bank = build_memory_bank(graph, make_embedder(request.config))
    if request.format == "binary":
        written = write_bank(bank, request.out_path)
    else:
        written = write_bank_json(bank, request.out_path)
    return ExportBankResponse(
        out_path=request.out_path,
        rows=bank.size,
        dim=bank.dim,
        bytes_written=written,
    )
