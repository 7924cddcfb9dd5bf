import numpy as np
import pytest

from focusattn.core.attention import AttentionInputs, pfa_step
from focusattn.core.cascade import Variant, run_cascade
from focusattn.core.oracle import dense_softmax_under_mask, dense_topk_mask, oracle_cascade, oracle_pfa_chain
from focusattn.core.structures import DenseMatrix, RowSparseMatrix
from focusattn.core.tensor_io import synthetic_input


def _chain(rng, n, d, length):
    return [tuple(rng.normal(size=(n, d)) for _ in range(3)) for _ in range(length)]


class TestDenseHelpers:
    def test_softmax_under_mask_zeroes_masked(self):
        # Arrange
        scores = np.array([[1.0, 2.0, 3.0]])
        mask = np.array([[True, False, True]])

        # Act
        p = dense_softmax_under_mask(scores, mask)

        # Assert
        assert p[0, 1] == 0.0
        assert p.sum() == pytest.approx(1.0)

    def test_topk_mask_tie_break(self):
        """Among equal values the lower columns win."""
        # Act
        keep = dense_topk_mask(np.ones((1, 5)), np.ones((1, 5), dtype=bool), 2)

        # Assert
        assert keep.tolist() == [[True, True, False, False, False]]

    def test_topk_mask_never_picks_disallowed(self):
        # Arrange
        values = np.array([[9.0, 1.0, 5.0]])
        allowed = np.array([[False, True, True]])

        # Act
        keep = dense_topk_mask(values, allowed, 3)

        # Assert
        assert keep.tolist() == [[False, True, True]]


class TestOracleChains:
    @pytest.mark.parametrize("n,d", [(16, 2), (64, 8)])
    @pytest.mark.parametrize("schedule", ["full", "halving"])
    def test_sparse_chain_matches_dense_replay(self, rng, n, d, schedule):
        """A, I and O agree with the masked dense replay at every step."""
        # Arrange
        length = 5
        ks = [n] * length if schedule == "full" else [max(1, n >> s) for s in range(length)]
        steps = _chain(rng, n, d, length)

        # Act
        expected = oracle_pfa_chain(steps, ks)
        previous = RowSparseMatrix.ones(n)
        mask = previous.mask()
        for (q, k, v), k_l, want in zip(steps, ks, expected):
            got = pfa_step(AttentionInputs(DenseMatrix(q), DenseMatrix(k), DenseMatrix(v)), previous, mask, k_l)
            previous, mask = got.attention, got.mask

            # Assert
            assert np.array_equal(got.mask.to_dense(), want.mask)
            assert np.max(np.abs(got.attention.to_dense() - want.attention)) <= 1e-10
            assert np.max(np.abs(got.output.values - want.output)) <= 1e-10

    def test_renormalized_chain_matches(self, rng):
        # Arrange
        steps = _chain(rng, 16, 4, 3)
        ks = [8, 4, 2]

        # Act
        expected = oracle_pfa_chain(steps, ks, renormalize_after_topk=True)
        previous = RowSparseMatrix.ones(16)
        mask = previous.mask()
        for (q, k, v), k_l, want in zip(steps, ks, expected):
            got = pfa_step(AttentionInputs(DenseMatrix(q), DenseMatrix(k), DenseMatrix(v)), previous, mask, k_l,
                           renormalize_after_topk=True)
            previous, mask = got.attention, got.mask

            # Assert
            assert np.max(np.abs(got.attention.to_dense() - want.attention)) <= 1e-10


class TestOracleCascade:
    @pytest.mark.parametrize("renorm", [False, True])
    def test_cascade_matches_dense_replay(self, tiny_preset, tiny_weights, tiny_map, renorm):
        """Window partition, shift, chains and residuals agree with index-arithmetic replay."""
        # Act
        out, _ = run_cascade(tiny_preset, tiny_weights, tiny_map, Variant.PFA, renormalize_after_topk=renorm)
        want = oracle_cascade(tiny_preset, tiny_weights, tiny_map.values, renormalize_after_topk=renorm)

        # Assert
        assert want.shape == tiny_map.shape
        assert np.max(np.abs(out.values - want)) <= 1e-9

    def test_map_smaller_than_window(self, tiny_preset, tiny_weights):
        """A 3 x 6 map pads to one row of two 4 x 4 windows on both paths."""
        # Arrange
        fmap = synthetic_input(3, 6, tiny_preset.channels, seed=2)

        # Act
        out, trace = run_cascade(tiny_preset, tiny_weights, fmap)
        want = oracle_cascade(tiny_preset, tiny_weights, fmap.values)

        # Assert
        assert trace.padded_hw == (4, 8)
        assert out.shape == (3, 6, tiny_preset.channels)
        assert np.max(np.abs(out.values - want)) <= 1e-9
