import numpy as np

from focusattn.core.cascade import Variant
from focusattn.core.history_tracker import LayerCommand
from focusattn.core.windows import FeatureMap


def double_layer(layer, fmap, **kwargs):
    return FeatureMap(fmap.values * 2)


class TestLayerCommand:
    def test_records_one_entry_per_call(self):
        """Each call appends function, layer, kwargs, shapes and timing."""
        # Arrange
        history = []
        step = LayerCommand(function=double_layer, history_list=history)
        fmap = FeatureMap(np.ones((2, 3, 1)))

        # Act
        out = step(1, fmap, variant=Variant.PFA, shift=(0, 0), k=np.int64(4))

        # Assert
        assert np.array_equal(out.values, 2 * fmap.values)
        assert len(history) == 1
        record = history[0]
        assert record["function"] == "double_layer"
        assert record["layer"] == 1
        assert record["kwargs"] == {"variant": "pfa", "shift": [0, 0], "k": 4}
        assert record["shape_change"] == {"before": [2, 3, 1], "after": [2, 3, 1]}
        assert record["elapsed_s"] >= 0

    def test_without_history_list_nothing_is_recorded(self):
        # Arrange
        step = LayerCommand(function=double_layer)

        # Act
        out = step(2, FeatureMap(np.ones((1, 1, 1))))

        # Assert
        assert out.values[0, 0, 0] == 2.0

    def test_wrapper_keeps_function_name(self):
        step = LayerCommand(function=double_layer, history_list=[])
        assert step.__name__ == "double_layer"
