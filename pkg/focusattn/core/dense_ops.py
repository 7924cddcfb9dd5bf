# focusattn/core/dense_ops.py

"""Dense substrate: matmul, masked row softmax, row normalization and seeded fills.

These functions double as the reference path the sparse kernels are checked
against, so they favour plain numpy calls over anything clever.
"""

from enum import Enum
from typing import Union

import numpy as np

from focusattn.core.errors import EmptyRowError, FocusAttentionError, ShapeMismatchError
from focusattn.core.structures import DenseMatrix, IndexMask, RowSparseMatrix, ScoreMatrix

# Softmax results that underflow are clamped here so a computed position never
# turns into an explicit zero and silently leaves the support.
MIN_WEIGHT = np.finfo(np.float64).tiny


class Distribution(str, Enum):
    UNIFORM = "uniform"
    GAUSSIAN = "gaussian"


def dense_matmul(a: DenseMatrix, b: DenseMatrix) -> DenseMatrix:
    """Standard matrix product a @ b.

    Goes through BLAS, whose summation order is its own; results are
    deterministic for a fixed build and thread setting but not bound to an
    ascending inner-index order. The oracle comparisons allow 1e-9 for this.
    """
    if a.cols != b.rows:
        raise ShapeMismatchError(
            f"cannot multiply {a.rows}x{a.cols} by {b.rows}x{b.cols}: inner dimensions differ"
        )
    return DenseMatrix(np.matmul(a.values, b.values), copy=False)


def _segment_softmax(data: np.ndarray, indptr: np.ndarray, row_ids: np.ndarray,
                     scale: float) -> np.ndarray:
    """Softmax of each CSR row segment of scale * data (rows must be non-empty)."""
    scaled = data * scale
    starts = indptr[:-1]
    row_max = np.maximum.reduceat(scaled, starts)
    shifted = np.exp(scaled - row_max[row_ids])
    row_sum = np.add.reduceat(shifted, starts)
    weights = shifted / row_sum[row_ids]
    return np.maximum(weights, MIN_WEIGHT)


def sparse_softmax_rows(scores: ScoreMatrix, scale: float) -> RowSparseMatrix:
    """Softmax over the stored entries of each row of a row-sparse score matrix."""
    if not scale > 0:
        raise FocusAttentionError(f"softmax scale must be positive, got {scale}")
    scores.require_nonempty_rows("attention row")
    weights = _segment_softmax(scores.data, scores.indptr, scores.row_ids(), scale)
    return RowSparseMatrix(scores.shape, scores.indptr, scores.indices, weights)


def gather_scores(scores: DenseMatrix, mask: IndexMask) -> ScoreMatrix:
    """Pick the masked-in entries of a dense score matrix."""
    if scores.shape != mask.shape:
        raise ShapeMismatchError(f"mask {mask.shape} does not match scores {scores.shape}")
    data = scores.values[mask.row_ids(), mask.indices]
    return ScoreMatrix(mask.shape, mask.indptr, mask.indices, data)


def masked_softmax_rows(scores: DenseMatrix, mask: IndexMask, scale: float) -> RowSparseMatrix:
    """Row softmax of scale * scores restricted to the masked-in positions.

    Masked-out positions are absent from the result (not stored as zeros).
    """
    return sparse_softmax_rows(gather_scores(scores, mask), scale)


def row_normalize(m: RowSparseMatrix) -> RowSparseMatrix:
    """Divide every entry by its row sum; support is unchanged."""
    m.require_nonempty_rows("row")
    sums = np.add.reduceat(m.data, m.indptr[:-1]) if m.rows else np.zeros(0)
    if np.any(sums <= 0.0):
        row = int(np.flatnonzero(sums <= 0.0)[0])
        raise EmptyRowError(f"row {row} sums to {sums[row]!r}; cannot normalize", row=row)
    return RowSparseMatrix(m.shape, m.indptr, m.indices, m.data / sums[m.row_ids()])


def seeded_fill(rows: int, cols: int, seed: int,
                distribution: Union[Distribution, str] = Distribution.UNIFORM,
                scale: float = 1.0) -> DenseMatrix:
    """Deterministic pseudo-random matrix.

    Generator: numpy PCG64 seeded through SeedSequence(seed mod 2**64).
    uniform draws from [-scale, scale), gaussian from N(0, scale**2).
    """
    if rows < 1 or cols < 1:
        raise ShapeMismatchError(f"seeded_fill needs rows, cols >= 1, got {rows}x{cols}")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed) % (1 << 64))))
    distribution = Distribution(distribution)
    if distribution is Distribution.UNIFORM:
        values = rng.uniform(-scale, scale, size=(rows, cols))
    else:
        values = rng.normal(0.0, scale, size=(rows, cols))
    return DenseMatrix(values, copy=False)
