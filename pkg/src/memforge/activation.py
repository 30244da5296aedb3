"""Dual-mode memory activation: long-term memory in, working memory out.

Static activation ranks bank rows by cosine similarity to the pooled
query. Dynamic activation scores rows with a masked, scaled dot-product
softmax under optional query/memory projections. Adaptive selection fuses
the two top-K sets (dynamic copy wins on overlap) into the working-memory
block, whose relevance-scaled rows are prepended to the input sequence.

All operations are pure functions over immutable inputs; ties anywhere
break by ascending bank index so output is reproducible across platforms.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .embedding import MemoryBank
from .errors import (
    DataError,
    DimensionMismatchError,
    MemoryFullyMaskedError,
    NoActivationError,
)
from .graphstore import EdgeKey

MODE_STATIC = "static"
MODE_DYNAMIC = "dynamic"
MODE_FUSED = "fused"

# Added to masked logits instead of -inf: numerically zeroes the softmax
# mass without risking NaN propagation.
MASK_SENTINEL = -1e9


@dataclass
class ActivationConfig:
    epsilon: float = 1e-8
    cap_dynamic: int = 5
    cap_static: int = 5
    mask: np.ndarray | None = None
    projection_query: np.ndarray | None = None
    projection_memory: np.ndarray | None = None
    relevance_floor: float | None = None

    def __post_init__(self):
        if self.cap_dynamic < 1 or self.cap_static < 1:
            raise DataError("activation caps must be >= 1")
        if self.relevance_floor is not None and not 0.0 <= self.relevance_floor <= 1.0:
            raise DataError("relevance floor must lie in [0,1]")


@dataclass
class ActivationResult:
    """Selected bank rows with their relevance scores and provenance."""

    mode: str
    indices: list[int]
    scores: np.ndarray
    wm_rows: np.ndarray
    provenance: dict[int, EdgeKey] = field(default_factory=dict)
    degenerate: bool = False
    # full pre-selection softmax distribution; dynamic mode only
    distribution: np.ndarray | None = None


def mask_from_indices(size: int, masked: list[int]) -> np.ndarray:
    """Build a structural mask vector: 0 everywhere, sentinel at ``masked``."""
    mask = np.zeros(size, dtype=np.float64)
    for index in masked:
        if not 0 <= index < size:
            raise DataError(f"mask index {index} outside bank of size {size}")
        mask[index] = MASK_SENTINEL
    return mask


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max()
    weights = np.exp(shifted)
    return weights / weights.sum()


def top_k_indices(scores: np.ndarray, k: int) -> list[int]:
    """Indices of the k largest scores, ties broken by ascending index."""
    order = np.lexsort((np.arange(scores.shape[0]), -scores))
    return order[: min(k, scores.shape[0])].tolist()


def compute_query(tokens: np.ndarray, epsilon: float = 1e-8) -> np.ndarray:
    """Pooled, normalized query: column mean over tokens, then L2-normalize
    with an epsilon guard so an all-zero sequence yields the zero query.
    """
    tokens = np.asarray(tokens, dtype=np.float64)
    if tokens.ndim != 2 or tokens.shape[0] < 1:
        raise DataError("input sequence must be a non-empty T x d matrix")
    mean = tokens.mean(axis=0)
    return mean / (np.linalg.norm(mean) + epsilon)


def static_activate(bank: MemoryBank, q: np.ndarray, cap_static: int) -> ActivationResult:
    """Cosine ranking. A zero query (or zero-norm row) scores 0; negative
    cosines rank but clamp to 0 when scaling rows, so anti-correlated
    memories are never injected with flipped sign.
    """
    if bank.size == 0:
        raise DataError("memory bank is empty")
    if cap_static < 1:
        raise DataError("static cap must be >= 1")
    q = np.asarray(q, dtype=np.float64)
    row_norms = np.linalg.norm(bank.matrix, axis=1)
    q_norm = float(np.linalg.norm(q))
    degenerate = q_norm == 0.0
    denom = row_norms * q_norm
    with np.errstate(invalid="ignore", divide="ignore"):
        scores = np.where(denom > 0.0, bank.matrix @ q / np.where(denom == 0, 1, denom), 0.0)
    selected = top_k_indices(scores, cap_static)
    picked = scores[selected]
    scaled = bank.matrix[selected] * np.clip(picked, 0.0, 1.0)[:, None]
    return ActivationResult(
        mode=MODE_STATIC,
        indices=selected,
        scores=picked,
        wm_rows=scaled,
        provenance={i: bank.provenance[i] for i in selected},
        degenerate=degenerate,
    )


def dynamic_activate(
    bank: MemoryBank, q: np.ndarray, config: ActivationConfig
) -> ActivationResult:
    """Masked scaled-dot softmax over the (optionally projected) bank.

    Relevance is softmax((M' q') / sqrt(d) + mask) over all rows; the top
    cap_dynamic unmasked rows are kept and the raw bank rows are scaled by
    their softmax weight.
    """
    if bank.size == 0:
        raise DataError("memory bank is empty")
    q = np.asarray(q, dtype=np.float64)
    d = bank.dim
    if q.shape != (d,):
        raise DimensionMismatchError(f"query shape {q.shape} does not match d={d}")

    projected_q = q if config.projection_query is None else config.projection_query @ q
    projected_m = (
        bank.matrix
        if config.projection_memory is None
        else bank.matrix @ config.projection_memory.T
    )
    logits = (projected_m @ projected_q) / np.sqrt(d)
    if config.mask is not None:
        mask = np.asarray(config.mask, dtype=np.float64)
        if mask.shape != (bank.size,):
            raise DimensionMismatchError(
                f"mask length {mask.shape} does not match bank size {bank.size}"
            )
        logits = logits + mask
        eligible = np.flatnonzero(mask == 0.0)
    else:
        eligible = np.arange(bank.size)
    if eligible.size == 0:
        raise MemoryFullyMaskedError("memory fully masked: no eligible rows")

    relevance = softmax(logits)
    # rank by logits: same order as the softmax mass (strictly monotone)
    # but immune to exp underflow collapsing distinct scores into ties
    order = np.lexsort((eligible, -logits[eligible]))
    selected = eligible[order][: min(config.cap_dynamic, eligible.size)].tolist()
    picked = relevance[selected]
    return ActivationResult(
        mode=MODE_DYNAMIC,
        indices=selected,
        scores=picked,
        wm_rows=picked[:, None] * bank.matrix[selected],
        provenance={i: bank.provenance[i] for i in selected},
        distribution=relevance,
    )


def adaptive_select(
    static: ActivationResult,
    dynamic: ActivationResult,
    config: ActivationConfig,
) -> ActivationResult:
    """Fuse per-mode top-K sets into one working-memory block.

    Indices selected by both modes keep the dynamic-scored copy. An
    optional relevance floor drops entries scoring below it on their own
    mode's scale. Ordering: dynamic entries by score, then static-only
    entries by score.
    """
    floor = config.relevance_floor

    def kept(result: ActivationResult) -> list[int]:
        if floor is None:
            return list(range(len(result.indices)))
        return [pos for pos, s in enumerate(result.scores) if s >= floor]

    dyn_positions = kept(dynamic)
    dyn_set = {dynamic.indices[pos] for pos in dyn_positions}
    stat_positions = [
        pos for pos in kept(static) if static.indices[pos] not in dyn_set
    ]

    indices = [dynamic.indices[pos] for pos in dyn_positions] + [
        static.indices[pos] for pos in stat_positions
    ]
    if not indices:
        raise NoActivationError("no activation: both selections are empty")

    scores = np.concatenate(
        [
            dynamic.scores[dyn_positions] if dyn_positions else np.empty(0),
            static.scores[stat_positions] if stat_positions else np.empty(0),
        ]
    )
    rows = [dynamic.wm_rows[pos] for pos in dyn_positions] + [
        static.wm_rows[pos] for pos in stat_positions
    ]
    provenance = {i: dynamic.provenance[i] for i in dyn_set}
    provenance.update(
        {static.indices[pos]: static.provenance[static.indices[pos]] for pos in stat_positions}
    )
    return ActivationResult(
        mode=MODE_FUSED,
        indices=indices,
        scores=scores,
        wm_rows=np.stack(rows),
        provenance=provenance,
        degenerate=static.degenerate or dynamic.degenerate,
    )


def assemble_augmented(wm: ActivationResult, tokens: np.ndarray) -> np.ndarray:
    """Prepend working-memory rows to the token matrix: the (k+T) x d input
    consumed by downstream attention."""
    tokens = np.asarray(tokens, dtype=np.float64)
    if len(wm.indices) == 0:
        raise NoActivationError("cannot assemble with an empty working memory")
    if tokens.ndim != 2 or wm.wm_rows.shape[1] != tokens.shape[1]:
        raise DimensionMismatchError(
            f"working memory d={wm.wm_rows.shape[1]} vs tokens {tokens.shape}"
        )
    return np.vstack([wm.wm_rows, tokens])


# --- reference attention (verification only, no training) -------------------


def _row_softmax(scores: np.ndarray) -> np.ndarray:
    shifted = scores - scores.max(axis=1, keepdims=True)
    weights = np.exp(shifted)
    return weights / weights.sum(axis=1, keepdims=True)


def reference_attention(
    xstar: np.ndarray, w_q: np.ndarray, w_k: np.ndarray, w_v: np.ndarray
) -> np.ndarray:
    """Single-head self-attention over the augmented sequence:
    softmax(Q K^T / sqrt(d)) V with Q = X Wq, K = X Wk, V = X Wv.
    """
    xstar = np.asarray(xstar, dtype=np.float64)
    d = xstar.shape[1]
    queries = xstar @ w_q
    keys = xstar @ w_k
    values = xstar @ w_v
    attn = _row_softmax(queries @ keys.T / np.sqrt(d))
    return attn @ values


def attention_loss_and_grad(
    xstar: np.ndarray,
    w_q: np.ndarray,
    w_k: np.ndarray,
    w_v: np.ndarray,
    grad_weights: np.ndarray,
) -> tuple[float, np.ndarray]:
    """Scalar loss sum(output * grad_weights) and its analytic gradient
    with respect to the augmented sequence entries.
    """
    xstar = np.asarray(xstar, dtype=np.float64)
    d = xstar.shape[1]
    scale = 1.0 / np.sqrt(d)
    queries = xstar @ w_q
    keys = xstar @ w_k
    values = xstar @ w_v
    attn = _row_softmax(queries @ keys.T * scale)
    output = attn @ values
    loss = float((output * grad_weights).sum())

    d_output = grad_weights
    d_attn = d_output @ values.T
    d_values = attn.T @ d_output
    # softmax backward, row-wise: dS = A * (dA - sum(dA * A))
    d_scores = attn * (d_attn - (d_attn * attn).sum(axis=1, keepdims=True))
    d_queries = d_scores @ keys * scale
    d_keys = d_scores.T @ queries * scale
    d_xstar = d_queries @ w_q.T + d_keys @ w_k.T + d_values @ w_v.T
    return loss, d_xstar
