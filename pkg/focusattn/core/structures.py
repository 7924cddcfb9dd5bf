# focusattn/core/structures.py

"""
Matrix containers shared by every kernel.

DenseMatrix wraps a read-only float64 array. The row-sparse types use a CSR
layout (indptr / indices / data) with strictly increasing columns per row:

- IndexMask       binary structure (the index matrix I)
- ScoreMatrix     raw masked scores, any finite sign (output of the SMM score kernel)
- RowSparseMatrix attention maps; every stored weight is strictly positive

All containers are immutable once built and safe to share between threads.
"""

from dataclasses import InitVar, dataclass
from typing import Iterable, Optional, Sequence, Tuple

import numpy as np

from focusattn.core.errors import (
    EmptyRowError,
    FocusAttentionError,
    ShapeMismatchError,
    SupportMismatchError,
)


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class DenseMatrix:
    """Row-major float64 matrix; values are finite and read-only."""

    values: np.ndarray
    copy: InitVar[bool] = True

    def __post_init__(self, copy: bool):
        arr = np.array(self.values, dtype=np.float64, order="C", copy=True) if copy else \
            np.ascontiguousarray(self.values, dtype=np.float64)
        if arr.ndim != 2:
            raise ShapeMismatchError(f"DenseMatrix needs a 2-D array, got shape {arr.shape}")
        if not np.isfinite(arr).all():
            raise FocusAttentionError("DenseMatrix values must be finite (found NaN or Inf)")
        object.__setattr__(self, "values", _frozen(arr))

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self) -> Tuple[int, int]:
        return self.values.shape

    @classmethod
    def identity(cls, n: int) -> "DenseMatrix":
        return cls(np.eye(n), copy=False)

    @classmethod
    def zeros(cls, rows: int, cols: int) -> "DenseMatrix":
        return cls(np.zeros((rows, cols)), copy=False)

    def transpose(self) -> "DenseMatrix":
        return DenseMatrix(self.values.T)

    def column_slice(self, start: int, stop: int) -> "DenseMatrix":
        """Columns [start, stop), used to split projections into heads."""
        return DenseMatrix(self.values[:, start:stop])

    def max_abs_diff(self, other: "DenseMatrix") -> float:
        if self.shape != other.shape:
            raise ShapeMismatchError(f"cannot compare {self.shape} with {other.shape}")
        return float(np.max(np.abs(self.values - other.values))) if self.values.size else 0.0


@dataclass(frozen=True, eq=False)
class _RowSparseStructure:
    """CSR skeleton: per-row sorted, strictly increasing column indices."""

    shape: Tuple[int, int]
    indptr: np.ndarray
    indices: np.ndarray

    def __post_init__(self):
        rows, cols = (int(self.shape[0]), int(self.shape[1]))
        if rows < 0 or cols < 0:
            raise ShapeMismatchError(f"negative shape {self.shape}")
        indptr = np.array(self.indptr, dtype=np.int64, copy=True)
        indices = np.array(self.indices, dtype=np.int64, copy=True)
        if indptr.ndim != 1 or indptr.size != rows + 1:
            raise ShapeMismatchError(f"indptr must have {rows + 1} entries, got {indptr.size}")
        if indptr[0] != 0 or indptr[-1] != indices.size or np.any(np.diff(indptr) < 0):
            raise FocusAttentionError("indptr must start at 0, be nondecreasing and end at nnz")
        if indices.size:
            if indices.min() < 0 or indices.max() >= cols:
                raise FocusAttentionError(f"column index out of range for {cols} columns")
            step = np.diff(indices)
            row_start = np.zeros(step.size, dtype=bool)
            starts = indptr[1:-1]
            starts = starts[(starts > 0) & (starts < indices.size)]
            row_start[starts - 1] = True
            if np.any((step <= 0) & ~row_start):
                raise FocusAttentionError("column indices must be strictly increasing within each row")
        object.__setattr__(self, "shape", (rows, cols))
        object.__setattr__(self, "indptr", _frozen(indptr))
        object.__setattr__(self, "indices", _frozen(indices))

    @property
    def rows(self) -> int:
        return self.shape[0]

    @property
    def cols(self) -> int:
        return self.shape[1]

    @property
    def nnz(self) -> int:
        return int(self.indices.size)

    def row_nnz(self) -> np.ndarray:
        return np.diff(self.indptr)

    def row_ids(self) -> np.ndarray:
        """Row index of every stored entry, in storage order."""
        return np.repeat(np.arange(self.rows, dtype=np.int64), self.row_nnz())

    def row_indices(self, i: int) -> np.ndarray:
        return self.indices[self.indptr[i]:self.indptr[i + 1]]

    def uniform_row_nnz(self) -> Optional[int]:
        """The shared per-row count when every row stores the same number of entries."""
        counts = self.row_nnz()
        if counts.size and np.all(counts == counts[0]):
            return int(counts[0])
        return None

    def keys(self) -> np.ndarray:
        """Flat (row * cols + col) keys; sorted ascending by construction."""
        return self.row_ids() * self.cols + self.indices

    def same_support(self, other: "_RowSparseStructure") -> bool:
        return (
            self.shape == other.shape
            and np.array_equal(self.indptr, other.indptr)
            and np.array_equal(self.indices, other.indices)
        )

    def require_nonempty_rows(self, what: str = "row") -> None:
        empty = np.flatnonzero(self.row_nnz() == 0)
        if empty.size:
            raise EmptyRowError(f"{what} {int(empty[0])} is empty", row=int(empty[0]))

    def support_dense(self) -> np.ndarray:
        out = np.zeros(self.shape, dtype=bool)
        out[self.row_ids(), self.indices] = True
        return out


@dataclass(frozen=True, eq=False)
class IndexMask(_RowSparseStructure):
    """Binary row-sparse structure marking permitted (query, key) pairs."""

    @classmethod
    def full(cls, rows: int, cols: int) -> "IndexMask":
        indptr = np.arange(rows + 1, dtype=np.int64) * cols
        indices = np.tile(np.arange(cols, dtype=np.int64), rows)
        return cls((rows, cols), indptr, indices)

    @classmethod
    def from_rows(cls, rows: Sequence[Iterable[int]], cols: int) -> "IndexMask":
        per_row = [np.unique(np.asarray(list(r), dtype=np.int64)) for r in rows]
        indptr = np.concatenate([[0], np.cumsum([r.size for r in per_row])])
        indices = np.concatenate(per_row) if per_row else np.zeros(0, dtype=np.int64)
        return cls((len(per_row), cols), indptr, indices)

    @classmethod
    def from_dense(cls, support: np.ndarray) -> "IndexMask":
        support = np.asarray(support, dtype=bool)
        rows, cols = np.nonzero(support)
        indptr = np.concatenate([[0], np.cumsum(support.sum(axis=1))])
        return cls(support.shape, indptr, cols)

    def to_dense(self) -> np.ndarray:
        return self.support_dense()


@dataclass(frozen=True, eq=False)
class ScoreMatrix(_RowSparseStructure):
    """Row-sparse raw scores; values may take any finite sign."""

    data: np.ndarray

    def __post_init__(self):
        super().__post_init__()
        data = np.array(self.data, dtype=np.float64, copy=True)
        if data.shape != self.indices.shape:
            raise ShapeMismatchError(f"data has {data.size} entries, structure has {self.nnz}")
        if not np.isfinite(data).all():
            raise FocusAttentionError("sparse values must be finite")
        self._check_data(data)
        object.__setattr__(self, "data", _frozen(data))

    def _check_data(self, data: np.ndarray) -> None:
        pass

    def row(self, i: int) -> Tuple[np.ndarray, np.ndarray]:
        lo, hi = self.indptr[i], self.indptr[i + 1]
        return self.indices[lo:hi], self.data[lo:hi]

    def mask(self) -> IndexMask:
        return IndexMask(self.shape, self.indptr, self.indices)

    def to_dense(self, fill: float = 0.0) -> np.ndarray:
        out = np.full(self.shape, fill, dtype=np.float64)
        out[self.row_ids(), self.indices] = self.data
        return out

    def row_sums(self) -> np.ndarray:
        return np.bincount(self.row_ids(), weights=self.data, minlength=self.rows)


@dataclass(frozen=True, eq=False)
class RowSparseMatrix(ScoreMatrix):
    """Attention map: sorted (column, weight) rows, weights strictly positive."""

    def _check_data(self, data: np.ndarray) -> None:
        if data.size and data.min() <= 0.0:
            bad = int(np.flatnonzero(data <= 0.0)[0])
            raise FocusAttentionError(
                f"attention weights must be strictly positive (entry {bad} is {data[bad]!r})"
            )

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[Tuple[int, float]]], cols: int) -> "RowSparseMatrix":
        """Build from per-row (column, weight) pairs in any order."""
        indptr = [0]
        indices, data = [], []
        for entries in rows:
            ordered = sorted(entries)
            indices.extend(c for c, _ in ordered)
            data.extend(w for _, w in ordered)
            indptr.append(len(indices))
        return cls((len(rows), cols), np.asarray(indptr), np.asarray(indices, dtype=np.int64),
                   np.asarray(data, dtype=np.float64))

    @classmethod
    def from_dense(cls, dense: np.ndarray) -> "RowSparseMatrix":
        """Keep the strictly positive entries of a dense array."""
        dense = np.asarray(dense, dtype=np.float64)
        support = dense > 0.0
        r, c = np.nonzero(support)
        indptr = np.concatenate([[0], np.cumsum(support.sum(axis=1))])
        return cls(dense.shape, indptr, c, dense[r, c])

    @classmethod
    def full(cls, rows: int, cols: int, value: float) -> "RowSparseMatrix":
        mask = IndexMask.full(rows, cols)
        return cls((rows, cols), mask.indptr, mask.indices, np.full(mask.nnz, value))

    @classmethod
    def ones(cls, n: int) -> "RowSparseMatrix":
        """All-ones N x N map, the initial state of every chain."""
        return cls.full(n, n, 1.0)

    @classmethod
    def uniform(cls, n: int) -> "RowSparseMatrix":
        return cls.full(n, n, 1.0 / n)

    @classmethod
    def on_mask(cls, mask: IndexMask, data: np.ndarray) -> "RowSparseMatrix":
        return cls(mask.shape, mask.indptr, mask.indices, data)


def require_same_support(a: _RowSparseStructure, b: _RowSparseStructure, what: str) -> None:
    if a.shape != b.shape:
        raise ShapeMismatchError(f"{what}: shapes {a.shape} and {b.shape} differ")
    if not a.same_support(b):
        raise SupportMismatchError(f"{what}: supports differ")
