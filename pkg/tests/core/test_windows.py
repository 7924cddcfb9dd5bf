import numpy as np
import pytest

from focusattn.core.errors import FocusAttentionError, GeometryError, ShapeMismatchError
from focusattn.core.windows import (
    FeatureMap,
    merge,
    padded_size,
    parity_shift,
    partition,
    window_assignment,
)


class TestFeatureMap:
    def test_shape_properties(self):
        f = FeatureMap(np.zeros((3, 5, 2)))
        assert (f.h, f.w, f.c) == (3, 5, 2)

    def test_requires_three_axes(self):
        with pytest.raises(ShapeMismatchError, match="h x w x c"):
            FeatureMap(np.zeros((3, 5)))

    def test_rejects_non_finite(self):
        with pytest.raises(FocusAttentionError, match="finite"):
            FeatureMap(np.full((2, 2, 1), np.inf))


class TestPartition:
    def test_exact_fit_window_contents(self):
        """Windows are cut row-major; tokens inside a window are row-major too."""
        # Arrange
        values = np.arange(4 * 4, dtype=float).reshape(4, 4, 1)

        # Act
        batch = partition(FeatureMap(values), 2)

        # Assert
        assert batch.num_windows == 4
        assert batch.tokens_per_window == 4
        assert batch.tokens[0, :, 0].tolist() == [0, 1, 4, 5]
        assert batch.tokens[1, :, 0].tolist() == [2, 3, 6, 7]
        assert batch.padded_hw == (4, 4)

    def test_reflection_padding(self):
        """A 5-wide map padded to 6 repeats the reflected column."""
        # Arrange
        values = np.arange(2 * 5, dtype=float).reshape(2, 5, 1)

        # Act
        batch = partition(FeatureMap(values), 2)

        # Assert
        assert batch.padded_hw == (2, 6)
        assert batch.grid == (1, 3)
        # padded column 5 mirrors column 3
        assert batch.tokens[2, :, 0].tolist() == [4, 3, 9, 8]

    def test_shift_moves_windows(self):
        """With shift (1, 1) the first window starts at pixel (1, 1)."""
        # Arrange
        values = np.arange(4 * 4, dtype=float).reshape(4, 4, 1)

        # Act
        batch = partition(FeatureMap(values), 2, shift=(1, 1))

        # Assert
        assert batch.tokens[0, :, 0].tolist() == [5, 6, 9, 10]
        # the last window wraps around both edges
        assert batch.tokens[3, :, 0].tolist() == [15, 12, 3, 0]

    def test_map_smaller_than_window_is_padded(self):
        """20 x 40 with W = 32 pads to 32 x 64: two windows."""
        # Arrange
        f = FeatureMap(np.arange(20 * 40 * 2, dtype=float).reshape(20, 40, 2))

        # Act
        batch = partition(f, 32)

        # Assert
        assert batch.padded_hw == (32, 64)
        assert batch.num_windows == 2
        assert np.array_equal(merge(batch).values, f.values)

    @pytest.mark.parametrize("shape", [(1, 1, 2), (3, 8, 1)])
    def test_tiny_maps_round_trip(self, shape):
        f = FeatureMap(np.arange(np.prod(shape), dtype=float).reshape(shape))
        assert np.array_equal(merge(partition(f, 4, (2, 2))).values, f.values)

    def test_window_size_at_least_two(self):
        with pytest.raises(GeometryError):
            partition(FeatureMap(np.zeros((4, 4, 1))), 1)


class TestMerge:
    @pytest.mark.parametrize("h,w,ws,shift", [
        (8, 8, 4, (0, 0)),
        (8, 8, 4, (2, 2)),
        (7, 10, 4, (2, 2)),
        (5, 9, 3, (1, 2)),
        (6, 6, 6, (3, 3)),
    ])
    def test_round_trip_is_exact(self, rng, h, w, ws, shift):
        """merge(partition(f)) gives f back bit for bit."""
        # Arrange
        f = FeatureMap(rng.normal(size=(h, w, 3)))

        # Act
        back = merge(partition(f, ws, shift))

        # Assert
        assert np.array_equal(back.values, f.values)

    def test_with_tokens_checks_shape(self, tiny_map):
        batch = partition(tiny_map, 4)
        with pytest.raises(ShapeMismatchError):
            batch.with_tokens(batch.tokens[:-1])


class TestParityAndAssignment:
    def test_parity_shift(self):
        assert parity_shift(1, 8) == (0, 0)
        assert parity_shift(2, 8) == (4, 4)
        assert parity_shift(7, 8) == (0, 0)

    def test_parity_shift_is_one_based(self):
        with pytest.raises(GeometryError):
            parity_shift(0, 8)

    def test_padded_size(self):
        assert padded_size(10, 12, 4) == (12, 12)
        assert padded_size(8, 8, 4) == (8, 8)

    def test_assignment_agrees_with_partition(self, rng):
        """window_assignment names the window each padded pixel lands in."""
        # Arrange
        h, w, ws, shift = 6, 8, 4, (2, 2)
        hp, wp = padded_size(h, w, ws)
        ids = np.arange(hp * wp, dtype=float).reshape(hp, wp, 1)

        # Act
        batch = partition(FeatureMap(ids), ws, shift)
        assignment = window_assignment(h, w, ws, shift)

        # Assert
        for window in range(batch.num_windows):
            pixels = batch.tokens[window, :, 0].astype(int)
            assert (assignment.reshape(-1)[pixels] == window).all()
