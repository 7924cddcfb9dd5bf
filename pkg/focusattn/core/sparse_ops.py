# focusattn/core/sparse_ops.py

"""
Row-sparse kernels: the masked score product, sparse aggregation, per-row
top-k, Sign mask extraction and the fused Hadamard + row-normalize step.

The score and aggregate kernels come in two layers. The `*_kernel` functions
work on raw arrays of any float dtype (the benchmark drives them directly,
also in float32); `smm_scores` / `smm_aggregate` validate typed inputs and
call them. Each kernel returns the number of multiply-accumulates it
performed alongside its result.
"""

from typing import Tuple

import numpy as np

from focusattn.core.dense_ops import MIN_WEIGHT, row_normalize
from focusattn.core.errors import FocusAttentionError, ShapeMismatchError, SupportMismatchError
from focusattn.core.structures import (
    DenseMatrix,
    IndexMask,
    RowSparseMatrix,
    ScoreMatrix,
    require_same_support,
)

# Query rows processed per gather; keeps the gathered key block cache resident.
ROW_BLOCK = 64


def _uniform_width(indptr: np.ndarray) -> int:
    counts = np.diff(indptr)
    if counts.size and np.all(counts == counts[0]):
        return int(counts[0])
    return -1


def scores_kernel(q: np.ndarray, k: np.ndarray, indptr: np.ndarray,
                  indices: np.ndarray) -> Tuple[np.ndarray, int]:
    """dot(q[i], k[j]) for every stored (i, j); returns (values, macs)."""
    rows, d = q.shape
    out = np.empty(indices.size, dtype=np.result_type(q, k))
    macs = 0
    width = _uniform_width(indptr)
    if width == k.shape[0] and width > 0:
        # every row holds all columns in ascending order: no position is skipped
        out[:] = np.matmul(q, k.T).reshape(-1)
        macs = rows * width * d
    elif width > 0:
        idx = indices.reshape(rows, width)
        out2 = out.reshape(rows, width)
        for r0 in range(0, rows, ROW_BLOCK):
            r1 = min(rows, r0 + ROW_BLOCK)
            gathered = k[idx[r0:r1]]
            out2[r0:r1] = np.einsum("bkd,bd->bk", gathered, q[r0:r1])
            macs += gathered.shape[0] * gathered.shape[1] * d
    elif indices.size:
        row_ids = np.repeat(np.arange(rows), np.diff(indptr))
        step = ROW_BLOCK * max(1, indices.size // max(rows, 1))
        for s in range(0, indices.size, step):
            e = min(indices.size, s + step)
            out[s:e] = np.einsum("ij,ij->i", q[row_ids[s:e]], k[indices[s:e]])
            macs += (e - s) * d
    return out, macs


def aggregate_kernel(data: np.ndarray, v: np.ndarray, indptr: np.ndarray,
                     indices: np.ndarray) -> Tuple[np.ndarray, int]:
    """Row i of the result is sum_j data(i, j) * v[j]; rows must be non-empty."""
    rows = indptr.size - 1
    d = v.shape[1]
    out = np.zeros((rows, d), dtype=np.result_type(data, v))
    macs = 0
    width = _uniform_width(indptr)
    if width > 0:
        w = data.reshape(rows, width)
        idx = indices.reshape(rows, width)
        for r0 in range(0, rows, ROW_BLOCK):
            r1 = min(rows, r0 + ROW_BLOCK)
            out[r0:r1] = np.einsum("bk,bkd->bd", w[r0:r1], v[idx[r0:r1]])
            macs += (r1 - r0) * width * d
    else:
        for r0 in range(0, rows, ROW_BLOCK):
            r1 = min(rows, r0 + ROW_BLOCK)
            s, e = indptr[r0], indptr[r1]
            if e == s:
                continue
            contrib = data[s:e, None] * v[indices[s:e]]
            out[r0:r1] = np.add.reduceat(contrib, indptr[r0:r1] - s, axis=0)
            macs += int(e - s) * d
    return out, macs


def smm_scores(q: DenseMatrix, k: DenseMatrix, mask: IndexMask) -> Tuple[ScoreMatrix, int]:
    """Unscaled q @ k.T computed only at the set positions of mask.

    Returns the scores and the measured MAC count (nnz(mask) * d).
    """
    if q.cols != k.cols:
        raise ShapeMismatchError(f"q is {q.rows}x{q.cols} but k is {k.rows}x{k.cols}: head dims differ")
    if mask.shape != (q.rows, k.rows):
        raise ShapeMismatchError(f"mask {mask.shape} must be {(q.rows, k.rows)}")
    values, macs = scores_kernel(q.values, k.values, mask.indptr, mask.indices)
    return ScoreMatrix(mask.shape, mask.indptr, mask.indices, values), macs


def smm_aggregate(a: RowSparseMatrix, v: DenseMatrix, mask: IndexMask) -> Tuple[DenseMatrix, int]:
    """a @ v where only the supported columns of each row contribute work."""
    require_same_support(a, mask, "attention map and index mask")
    if a.cols != v.rows:
        raise ShapeMismatchError(f"attention has {a.cols} columns but v has {v.rows} rows")
    a.require_nonempty_rows("attention row")
    values, macs = aggregate_kernel(a.data, v.values, a.indptr, a.indices)
    return DenseMatrix(values, copy=False), macs


def topk_rows(m: RowSparseMatrix, k: int) -> RowSparseMatrix:
    """Keep the min(k, nnz) largest entries of each row, ties to the lower column.

    Weights are left as they are (no renormalization).
    """
    if k < 1:
        raise FocusAttentionError(f"top-k needs k >= 1, got {k}")
    counts = m.row_nnz()
    if m.rows == 0 or counts.max() <= k:
        return m

    keep = np.minimum(counts, k)
    width = int(counts.max())
    local = np.arange(m.nnz) - np.repeat(m.indptr[:-1], counts)
    key = np.full((m.rows, width), np.inf)
    key[m.row_ids(), local] = -m.data
    # stable sort on -weight: equal weights stay in ascending column order
    order = np.argsort(key, axis=1, kind="stable")[:, :k]
    order.sort(axis=1)
    chosen = order < counts[:, None]
    positions = (m.indptr[:-1, None] + order)[chosen]

    indptr = np.concatenate([[0], np.cumsum(keep)])
    return RowSparseMatrix(m.shape, indptr, m.indices[positions], m.data[positions])


def sign_mask(m: RowSparseMatrix) -> IndexMask:
    """Binary index matrix with exactly the support of m."""
    m.require_nonempty_rows("attention row")
    return m.mask()


def _locate(sub: IndexMask, sup: IndexMask, what: str) -> np.ndarray:
    """Storage positions in sup of every entry of sub; sub must be a subset."""
    if sub.shape != sup.shape:
        raise ShapeMismatchError(f"{what}: shapes {sub.shape} and {sup.shape} differ")
    sub_keys, sup_keys = sub.keys(), sup.keys()
    pos = np.searchsorted(sup_keys, sub_keys)
    found = pos < sup_keys.size
    found[found] = sup_keys[pos[found]] == sub_keys[found]
    if not found.all():
        first = int(np.flatnonzero(~found)[0])
        row, col = divmod(int(sub_keys[first]), sub.cols)
        raise SupportMismatchError(f"{what}: entry ({row}, {col}) lies outside the allowed support")
    return pos


def restrict(m: RowSparseMatrix, mask: IndexMask) -> RowSparseMatrix:
    """Values of m at the positions of mask (mask must lie inside m's support)."""
    pos = _locate(mask, m.mask(), "restrict")
    return RowSparseMatrix.on_mask(mask, m.data[pos])


def hadamard_rownorm(current: RowSparseMatrix, previous: RowSparseMatrix) -> RowSparseMatrix:
    """Norm(current ⊙ previous) on current's support."""
    pos = _locate(current.mask(), previous.mask(), "hadamard_rownorm")
    current.require_nonempty_rows("attention row")
    product = np.maximum(current.data * previous.data[pos], MIN_WEIGHT)
    return row_normalize(RowSparseMatrix.on_mask(current.mask(), product))
