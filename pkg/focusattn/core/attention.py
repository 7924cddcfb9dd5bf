# focusattn/core/attention.py

"""
The four attention variants compared in the ablation:

- vanilla_attention           Softmax(QK^T / sqrt(d)) V
- topk_attention              softmax over the k largest scores of each row
- progressive_attention_step  Norm(A_prev ⊙ A_cal), A_cal computed densely
- pfa_step                    scores only under the inherited mask, Hadamard
                              with the inherited map, top-K^l, Sign for the next mask
"""

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from focusattn.core.dense_ops import dense_matmul, masked_softmax_rows, sparse_softmax_rows
from focusattn.core.errors import FocusAttentionError, ShapeMismatchError
from focusattn.core.sparse_ops import (
    hadamard_rownorm,
    restrict,
    sign_mask,
    smm_aggregate,
    smm_scores,
    topk_rows,
)
from focusattn.core.structures import (
    DenseMatrix,
    IndexMask,
    RowSparseMatrix,
    require_same_support,
)

ROW_SUM_TOLERANCE = 1e-6


@dataclass(frozen=True, eq=False)
class AttentionInputs:
    """Per-head Q, K, V of one window, each N x d."""

    q: DenseMatrix
    k: DenseMatrix
    v: DenseMatrix

    def __post_init__(self):
        if not (self.q.shape == self.k.shape == self.v.shape):
            raise ShapeMismatchError(
                f"q, k, v must share a shape, got {self.q.shape}, {self.k.shape}, {self.v.shape}"
            )
        if self.q.cols < 1:
            raise ShapeMismatchError("head dimension must be >= 1")

    @property
    def tokens(self) -> int:
        return self.q.rows

    @property
    def head_dim(self) -> int:
        return self.q.cols

    @property
    def scale(self) -> float:
        return 1.0 / math.sqrt(self.head_dim)


class AttentionResult(NamedTuple):
    attention: RowSparseMatrix
    output: DenseMatrix
    macs_scores: int
    macs_aggregate: int


class PfaStepResult(NamedTuple):
    attention: RowSparseMatrix
    mask: IndexMask
    output: DenseMatrix
    macs_scores: int
    macs_aggregate: int


def _dense_scores(inputs: AttentionInputs):
    scores = dense_matmul(inputs.q, inputs.k.transpose())
    return scores, inputs.tokens * inputs.tokens * inputs.head_dim


def vanilla_attention(inputs: AttentionInputs) -> AttentionResult:
    """Full-support softmax attention aggregating V."""
    n = inputs.tokens
    scores, macs_scores = _dense_scores(inputs)
    full = IndexMask.full(n, n)
    attention = masked_softmax_rows(scores, full, inputs.scale)
    output, macs_aggregate = smm_aggregate(attention, inputs.v, full)
    return AttentionResult(attention, output, macs_scores, macs_aggregate)


def topk_score_mask(scores: DenseMatrix, k: int) -> IndexMask:
    """Positions of the k largest scores per row; ties keep the lower column."""
    rows, cols = scores.shape
    order = np.argsort(-scores.values, axis=1, kind="stable")[:, :k]
    order.sort(axis=1)
    indptr = np.arange(rows + 1, dtype=np.int64) * order.shape[1]
    return IndexMask((rows, cols), indptr, order.reshape(-1))


def topk_attention(inputs: AttentionInputs, k: Optional[int] = None) -> AttentionResult:
    """Softmax over only the k largest scaled scores of each row (default k = N/2)."""
    n = inputs.tokens
    if k is None:
        k = max(1, n // 2)
    if not 1 <= k <= n:
        raise FocusAttentionError(f"top-k attention needs 1 <= k <= {n}, got {k}")
    scores, macs_scores = _dense_scores(inputs)
    mask = topk_score_mask(scores, k)
    attention = masked_softmax_rows(scores, mask, inputs.scale)
    output, macs_aggregate = smm_aggregate(attention, inputs.v, mask)
    return AttentionResult(attention, output, macs_scores, macs_aggregate)


def _check_square(previous: RowSparseMatrix, n: int) -> None:
    if previous.shape != (n, n):
        raise ShapeMismatchError(f"inherited map is {previous.shape}, window has {n} tokens")


def progressive_attention_step(inputs: AttentionInputs,
                               previous: RowSparseMatrix) -> AttentionResult:
    """Norm(previous ⊙ A_cal) on previous's support, A_cal computed densely."""
    _check_square(previous, inputs.tokens)
    sums = previous.row_sums()
    if sums.size and np.max(np.abs(sums - 1.0)) > ROW_SUM_TOLERANCE:
        raise FocusAttentionError("inherited attention rows must sum to 1")
    calculated = vanilla_attention(inputs)
    current = restrict(calculated.attention, previous.mask())
    attention = hadamard_rownorm(current, previous)
    output, macs_aggregate = smm_aggregate(attention, inputs.v, attention.mask())
    return AttentionResult(attention, output, calculated.macs_scores, macs_aggregate)


def _renormalize_trimmed(attention: RowSparseMatrix, before: np.ndarray) -> RowSparseMatrix:
    """Rescale to unit sum only the rows top-k actually trimmed."""
    trimmed = attention.row_nnz() < before
    if not trimmed.any():
        return attention
    divisor = np.where(trimmed, attention.row_sums(), 1.0)
    return RowSparseMatrix.on_mask(attention.mask(), attention.data / divisor[attention.row_ids()])


def pfa_step(inputs: AttentionInputs, previous: RowSparseMatrix, previous_mask: IndexMask,
             k_l: int, renormalize_after_topk: bool = False) -> PfaStepResult:
    """One progressive focused attention layer for one (window, head)."""
    _check_square(previous, inputs.tokens)
    require_same_support(previous, previous_mask, "inherited map and mask")
    if k_l < 1:
        raise FocusAttentionError(f"K^l must be >= 1, got {k_l}")

    scores, macs_scores = smm_scores(inputs.q, inputs.k, previous_mask)
    calculated = sparse_softmax_rows(scores, inputs.scale)
    combined = hadamard_rownorm(calculated, previous)
    attention = topk_rows(combined, k_l)
    if renormalize_after_topk:
        attention = _renormalize_trimmed(attention, combined.row_nnz())
    mask = sign_mask(attention)
    output, macs_aggregate = smm_aggregate(attention, inputs.v, mask)
    return PfaStepResult(attention, mask, output, macs_scores, macs_aggregate)
