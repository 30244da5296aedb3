"""Request/response models for the memforge service.

The CLI speaks exactly these models, whether it executes in-process or
against a remote server, so the wire format is the single contract.
"""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, Field

from ..config import PipelineConfig


class DocumentIn(BaseModel):
    id: str
    title: str = ""
    abstract: str = ""


class BuildRequest(BaseModel):
    snapshot_path: str
    corpus_path: Optional[str] = None
    documents: Optional[list[DocumentIn]] = None
    seed_query: Optional[str] = None
    config: PipelineConfig = Field(default_factory=PipelineConfig)


class BuildResponse(BaseModel):
    snapshot_path: str
    report: dict[str, int]


class ActivateRequest(BaseModel):
    snapshot_path: str
    query_text: Optional[str] = None
    tokens: Optional[list[list[float]]] = None
    masked_indices: Optional[list[int]] = None
    include_rows: bool = False
    projection_query_path: Optional[str] = None
    projection_memory_path: Optional[str] = None
    config: PipelineConfig = Field(default_factory=PipelineConfig)


class ActivationEntry(BaseModel):
    index: int
    score: float
    subject: str
    relation: str
    object: str
    triple: str


class ActivateResponse(BaseModel):
    mode: str
    degenerate: bool
    bank_rows: int
    dim: int
    indices: list[int]
    scores: list[float]
    entries: list[ActivationEntry]
    augmented_rows: int
    wm_rows: Optional[list[list[float]]] = None


class StatsRequest(BaseModel):
    snapshot_path: str


class StatsResponse(BaseModel):
    entities: int
    edges: int
    evidence_total: int
    diseases: int
    surface_forms: int
    weight_histogram: list[int]


class EvalRequest(BaseModel):
    seed: int = 0
    planted: int = Field(default=5, ge=1)
    distractors: int = Field(default=45, ge=0)
    max_cap: int = Field(default=5, ge=1)
    config: PipelineConfig = Field(default_factory=PipelineConfig)


class EvalRow(BaseModel):
    cap_D: int
    cap_S: int
    recall: float
    mean_score: float


class EvalResponse(BaseModel):
    rows: list[EvalRow]
    csv: str


class ExportBankRequest(BaseModel):
    snapshot_path: str
    out_path: str
    format: Literal["binary", "json"] = "binary"
    config: PipelineConfig = Field(default_factory=PipelineConfig)


class ExportBankResponse(BaseModel):
    out_path: str
    rows: int
    dim: int
    bytes_written: int


class HealthResponse(BaseModel):
    status: str
    version: str
