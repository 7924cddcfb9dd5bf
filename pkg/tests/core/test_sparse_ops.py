import numpy as np
import pytest

from focusattn.core.dense_ops import MIN_WEIGHT
from focusattn.core.errors import EmptyRowError, FocusAttentionError, ShapeMismatchError, SupportMismatchError
from focusattn.core.sparse_ops import (
    aggregate_kernel,
    hadamard_rownorm,
    restrict,
    scores_kernel,
    sign_mask,
    smm_aggregate,
    smm_scores,
    topk_rows,
)
from focusattn.core.structures import DenseMatrix, IndexMask, RowSparseMatrix


def _random_mask(rng, n, m, density):
    support = rng.random((n, m)) < density
    support[np.arange(n), rng.integers(0, m, size=n)] = True
    return IndexMask.from_dense(support)


class TestSmmScores:
    @pytest.mark.parametrize("n,d", [(1, 1), (7, 3), (64, 16), (130, 8)])
    def test_full_mask_equals_dense_product(self, rng, n, d):
        """With an all-ones mask the masked product is q @ k.T."""
        # Arrange
        q, k = rng.normal(size=(n, d)), rng.normal(size=(n, d))

        # Act
        scores, macs = smm_scores(DenseMatrix(q), DenseMatrix(k), IndexMask.full(n, n))

        # Assert
        assert np.max(np.abs(scores.to_dense() - q @ k.T)) <= 1e-12
        assert macs == n * n * d

    def test_full_rows_use_the_dense_product(self, rng):
        """Rows that hold every key column are computed as one q @ k.T, MACs still nnz * d."""
        # Arrange
        q, k = rng.normal(size=(3, 4)), rng.normal(size=(5, 4))
        mask = IndexMask.full(3, 5)

        # Act
        values, macs = scores_kernel(q, k, mask.indptr, mask.indices)

        # Assert
        assert np.array_equal(values, np.matmul(q, k.T).reshape(-1))
        assert macs == 3 * 5 * 4

    def test_uniform_partial_rows_match_full_rows(self, rng):
        """A uniform width below the key count takes the gather path and agrees with the full product."""
        # Arrange
        n, d = 16, 4
        q, k = rng.normal(size=(n, d)), rng.normal(size=(n, d))
        every = IndexMask.full(n, n)
        full, _ = scores_kernel(q, k, every.indptr, every.indices)
        half = IndexMask.from_rows([range(0, n, 2)] * n, n)

        # Act
        values, macs = scores_kernel(q, k, half.indptr, half.indices)

        # Assert
        assert np.max(np.abs(values - full.reshape(n, n)[:, ::2].reshape(-1))) <= 1e-12
        assert macs == n * (n // 2) * d

    def test_ragged_mask_computes_only_stored_entries(self, rng):
        """Per-row widths may differ; MACs equal nnz * d."""
        # Arrange
        q, k = rng.normal(size=(20, 5)), rng.normal(size=(12, 5))
        mask = _random_mask(rng, 20, 12, 0.3)

        # Act
        scores, macs = smm_scores(DenseMatrix(q), DenseMatrix(k), mask)

        # Assert
        dense = q @ k.T
        assert scores.same_support(mask)
        assert np.allclose(scores.data, dense[mask.row_ids(), mask.indices], atol=1e-12)
        assert macs == mask.nnz * 5

    def test_single_column_mask(self, rng):
        # Arrange
        q, k = rng.normal(size=(4, 2)), rng.normal(size=(4, 2))
        mask = IndexMask.from_rows([[3], [0], [1], [3]], cols=4)

        # Act
        scores, macs = smm_scores(DenseMatrix(q), DenseMatrix(k), mask)

        # Assert
        assert np.allclose(scores.data, [q[0] @ k[3], q[1] @ k[0], q[2] @ k[1], q[3] @ k[3]])
        assert macs == 8

    def test_head_dim_mismatch(self):
        with pytest.raises(ShapeMismatchError, match="head dims"):
            smm_scores(DenseMatrix.zeros(2, 3), DenseMatrix.zeros(2, 4), IndexMask.full(2, 2))

    def test_mask_shape_mismatch(self):
        with pytest.raises(ShapeMismatchError):
            smm_scores(DenseMatrix.zeros(2, 3), DenseMatrix.zeros(2, 3), IndexMask.full(3, 2))

    def test_float32_kernel_keeps_dtype(self, rng):
        """The raw kernel follows its input dtype (used by the benchmark)."""
        # Arrange
        q = rng.normal(size=(8, 4)).astype(np.float32)
        mask = IndexMask.full(8, 8)

        # Act
        values, macs = scores_kernel(q, q, mask.indptr, mask.indices)

        # Assert
        assert values.dtype == np.float32
        assert macs == 8 * 8 * 4


class TestSmmAggregate:
    def test_matches_dense_product(self, rng):
        # Arrange
        mask = _random_mask(rng, 10, 10, 0.5)
        a = RowSparseMatrix.on_mask(mask, rng.uniform(0.1, 1.0, size=mask.nnz))
        v = rng.normal(size=(10, 3))

        # Act
        out, macs = smm_aggregate(a, DenseMatrix(v), mask)

        # Assert
        assert np.allclose(out.values, a.to_dense() @ v, atol=1e-13)
        assert macs == mask.nnz * 3

    def test_uniform_width_path(self, rng):
        """Equal-width rows go through the blocked gather."""
        # Arrange
        mask = IndexMask.from_rows([[0, 2], [1, 3], [0, 1]], cols=4)
        a = RowSparseMatrix.on_mask(mask, np.full(6, 0.5))
        v = rng.normal(size=(4, 2))

        # Act
        out, _ = smm_aggregate(a, DenseMatrix(v), mask)

        # Assert
        assert np.allclose(out.values[0], 0.5 * (v[0] + v[2]))

    def test_support_must_match_mask(self):
        # Arrange
        a = RowSparseMatrix.ones(3)
        mask = IndexMask.from_rows([[0], [1], [2]], cols=3)

        # Act & Assert
        with pytest.raises(SupportMismatchError):
            smm_aggregate(a, DenseMatrix.zeros(3, 2), mask)

    def test_value_rows_must_match_columns(self):
        a = RowSparseMatrix.ones(3)
        with pytest.raises(ShapeMismatchError):
            smm_aggregate(a, DenseMatrix.zeros(4, 2), a.mask())

    def test_empty_row_rejected(self):
        a = RowSparseMatrix((2, 2), [0, 1, 1], [0], [1.0])
        with pytest.raises(EmptyRowError):
            smm_aggregate(a, DenseMatrix.zeros(2, 2), a.mask())

    def test_raw_kernel_counts_macs(self):
        # Act
        out, macs = aggregate_kernel(np.array([1.0, 2.0]), np.eye(2), np.array([0, 1, 2]), np.array([1, 0]))

        # Assert
        assert out.tolist() == [[0.0, 1.0], [2.0, 0.0]]
        assert macs == 4


class TestTopkRows:
    def test_keeps_largest_per_row(self):
        # Arrange
        m = RowSparseMatrix.from_rows([[(0, 0.1), (1, 0.5), (2, 0.2), (3, 0.2)]], cols=4)

        # Act
        top = topk_rows(m, 2)

        # Assert
        assert top.row(0)[0].tolist() == [1, 2]
        assert top.row(0)[1].tolist() == [0.5, 0.2]

    def test_ties_break_to_lower_column(self):
        """Equal weights keep the lowest column indices."""
        # Arrange
        m = RowSparseMatrix.full(1, 5, 0.2)

        # Act
        top = topk_rows(m, 3)

        # Assert
        assert top.row_indices(0).tolist() == [0, 1, 2]

    def test_short_rows_keep_everything(self):
        """A row with fewer than k entries is returned whole."""
        # Arrange
        m = RowSparseMatrix.from_rows([[(1, 0.3)], [(0, 0.1), (2, 0.4), (3, 0.5)]], cols=4)

        # Act
        top = topk_rows(m, 2)

        # Assert
        assert top.row_nnz().tolist() == [1, 2]
        assert top.row_indices(1).tolist() == [2, 3]

    def test_k_at_least_nnz_is_identity(self):
        m = RowSparseMatrix.ones(4)
        assert topk_rows(m, 4) is m

    def test_does_not_renormalize(self):
        # Act
        top = topk_rows(RowSparseMatrix.uniform(4), 1)

        # Assert
        assert top.row_sums().tolist() == [0.25] * 4

    def test_k_must_be_positive(self):
        with pytest.raises(FocusAttentionError, match="k >= 1"):
            topk_rows(RowSparseMatrix.ones(2), 0)


class TestMaskHelpers:
    def test_sign_mask_is_support(self):
        # Arrange
        m = RowSparseMatrix.from_rows([[(2, 0.5)], [(0, 1e-300), (1, 0.2)]], cols=3)

        # Act
        mask = sign_mask(m)

        # Assert
        assert mask.same_support(m)

    def test_restrict_to_sub_support(self):
        # Arrange
        m = RowSparseMatrix.from_rows([[(0, 0.1), (1, 0.2), (2, 0.7)]], cols=3)
        mask = IndexMask.from_rows([[0, 2]], cols=3)

        # Act
        restricted = restrict(m, mask)

        # Assert
        assert restricted.data.tolist() == [0.1, 0.7]

    def test_restrict_outside_support_names_the_entry(self):
        m = RowSparseMatrix.from_rows([[(0, 1.0)], [(0, 1.0)]], cols=3)
        mask = IndexMask.from_rows([[0], [2]], cols=3)
        with pytest.raises(SupportMismatchError, match=r"\(1, 2\)"):
            restrict(m, mask)


class TestHadamardRowNorm:
    def test_product_then_normalize(self):
        # Arrange
        current = RowSparseMatrix.from_rows([[(0, 0.5), (1, 0.5)]], cols=3)
        previous = RowSparseMatrix.from_rows([[(0, 0.2), (1, 0.6), (2, 0.2)]], cols=3)

        # Act
        out = hadamard_rownorm(current, previous)

        # Assert
        assert out.same_support(current)
        assert np.allclose(out.data, [0.25, 0.75])

    def test_all_ones_previous_is_neutral(self, rng):
        # Arrange
        weights = rng.uniform(0.1, 1.0, size=16)
        current = RowSparseMatrix.on_mask(IndexMask.full(4, 4), weights / np.repeat(
            np.add.reduceat(weights, [0, 4, 8, 12]), 4))

        # Act
        out = hadamard_rownorm(current, RowSparseMatrix.ones(4))

        # Assert
        assert np.allclose(out.data, current.data, atol=1e-15)

    def test_underflowing_product_stays_in_support(self):
        """Products below the smallest normal float are clamped, never zeroed."""
        # Arrange
        current = RowSparseMatrix.from_rows([[(0, 1e-200), (1, 1.0)]], cols=2)
        previous = RowSparseMatrix.from_rows([[(0, 1e-200), (1, 1.0)]], cols=2)

        # Act
        out = hadamard_rownorm(current, previous)

        # Assert
        assert out.nnz == 2
        assert out.data[0] == pytest.approx(MIN_WEIGHT)

    def test_current_must_lie_inside_previous(self):
        current = RowSparseMatrix.ones(2)
        previous = RowSparseMatrix.from_rows([[(0, 1.0)], [(1, 1.0)]], cols=2)
        with pytest.raises(SupportMismatchError):
            hadamard_rownorm(current, previous)
