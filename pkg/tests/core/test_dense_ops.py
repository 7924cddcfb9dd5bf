import numpy as np
import pytest

from focusattn.core.dense_ops import (
    MIN_WEIGHT,
    Distribution,
    dense_matmul,
    gather_scores,
    masked_softmax_rows,
    row_normalize,
    seeded_fill,
    sparse_softmax_rows,
)
from focusattn.core.errors import EmptyRowError, FocusAttentionError, ShapeMismatchError
from focusattn.core.structures import DenseMatrix, IndexMask, RowSparseMatrix, ScoreMatrix


class TestDenseMatmul:
    def test_matches_numpy(self, rng):
        # Arrange
        a, b = rng.normal(size=(3, 5)), rng.normal(size=(5, 2))

        # Act
        product = dense_matmul(DenseMatrix(a), DenseMatrix(b))

        # Assert
        assert np.allclose(product.values, a @ b, atol=1e-14)

    def test_inner_dimension_mismatch(self):
        with pytest.raises(ShapeMismatchError, match="inner dimensions"):
            dense_matmul(DenseMatrix.zeros(2, 3), DenseMatrix.zeros(2, 3))


class TestSoftmax:
    def test_full_mask_is_plain_softmax(self, rng):
        """Softmax under an all-ones mask matches the textbook formula."""
        # Arrange
        scores = rng.normal(size=(4, 6))
        expected = np.exp(scores * 0.5)
        expected /= expected.sum(axis=1, keepdims=True)

        # Act
        attention = masked_softmax_rows(DenseMatrix(scores), IndexMask.full(4, 6), scale=0.5)

        # Assert
        assert np.allclose(attention.to_dense(), expected, atol=1e-15)

    def test_masked_positions_are_absent(self):
        """Dropped positions are not stored and do not enter the denominator."""
        # Arrange
        scores = DenseMatrix([[1.0, 100.0, 1.0]])
        mask = IndexMask.from_rows([[0, 2]], cols=3)

        # Act
        attention = masked_softmax_rows(scores, mask, scale=1.0)

        # Assert
        assert attention.nnz == 2
        assert attention.row(0)[1].tolist() == [0.5, 0.5]

    def test_large_scores_do_not_overflow(self):
        # Act
        attention = sparse_softmax_rows(ScoreMatrix((1, 2), [0, 2], [0, 1], [1e6, 1e6 - 1.0]), 1.0)

        # Assert
        assert np.isfinite(attention.data).all()
        assert attention.row_sums()[0] == pytest.approx(1.0)

    def test_underflow_clamped_to_min_weight(self):
        """A hopeless entry stays in the support with the smallest normal weight."""
        # Act
        attention = sparse_softmax_rows(ScoreMatrix((1, 2), [0, 2], [0, 1], [0.0, -1e5]), 1.0)

        # Assert
        assert attention.nnz == 2
        assert attention.data[1] == MIN_WEIGHT

    def test_scale_must_be_positive(self):
        with pytest.raises(FocusAttentionError, match="scale"):
            sparse_softmax_rows(ScoreMatrix((1, 1), [0, 1], [0], [1.0]), 0.0)

    def test_empty_row_rejected(self):
        with pytest.raises(EmptyRowError):
            sparse_softmax_rows(ScoreMatrix((2, 2), [0, 1, 1], [0], [1.0]), 1.0)

    def test_gather_scores_picks_mask_positions(self):
        # Arrange
        scores = DenseMatrix([[1.0, 2.0], [3.0, 4.0]])
        mask = IndexMask.from_rows([[1], [0]], cols=2)

        # Act
        gathered = gather_scores(scores, mask)

        # Assert
        assert gathered.data.tolist() == [2.0, 3.0]


class TestRowNormalize:
    def test_rows_sum_to_one(self):
        # Arrange
        m = RowSparseMatrix.from_rows([[(0, 2.0), (3, 6.0)], [(1, 5.0)]], cols=4)

        # Act
        normalized = row_normalize(m)

        # Assert
        assert normalized.row(0)[1].tolist() == [0.25, 0.75]
        assert normalized.row(1)[1].tolist() == [1.0]
        assert normalized.same_support(m)

    def test_empty_row_is_an_error(self):
        with pytest.raises(EmptyRowError):
            row_normalize(RowSparseMatrix((2, 2), [0, 1, 1], [0], [1.0]))


class TestSeededFill:
    def test_same_seed_same_values(self):
        """Fills depend only on (rows, cols, seed, distribution, scale)."""
        # Act
        a = seeded_fill(4, 3, seed=7)
        b = seeded_fill(4, 3, seed=7)
        c = seeded_fill(4, 3, seed=8)

        # Assert
        assert np.array_equal(a.values, b.values)
        assert not np.array_equal(a.values, c.values)

    def test_uniform_bounds(self):
        # Act
        m = seeded_fill(50, 50, seed=1, distribution=Distribution.UNIFORM, scale=0.25)

        # Assert
        assert m.values.min() >= -0.25
        assert m.values.max() < 0.25

    def test_gaussian_accepts_string_and_large_seed(self):
        # Act
        m = seeded_fill(200, 50, seed=2 ** 70, distribution="gaussian", scale=2.0)

        # Assert
        assert abs(m.values.std() - 2.0) < 0.1

    def test_rejects_empty_shape(self):
        with pytest.raises(ShapeMismatchError):
            seeded_fill(0, 3, seed=0)
