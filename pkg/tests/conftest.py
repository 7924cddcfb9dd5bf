import numpy as np
import pytest

from focusattn.core.attention import AttentionInputs
from focusattn.core.presets import build_weights, custom_preset
from focusattn.core.structures import DenseMatrix
from focusattn.core.tensor_io import synthetic_input


@pytest.fixture
def rng():
    """Seeded generator so every test draws the same numbers."""
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_preset():
    """4x4 windows (N = 16), two heads of dim 4, K shrinking 16 -> 4 across two blocks."""
    return custom_preset(blocks=[2, 2], k_list=[16, 4], heads=2, channels=8, window_size=4, name="tiny")


@pytest.fixture
def tiny_weights(tiny_preset):
    return build_weights(tiny_preset, seed=0)


@pytest.fixture
def tiny_map():
    """8 x 10 map: 2 x 3 windows of 4 after padding the width to 12."""
    return synthetic_input(8, 10, 8, seed=0)


@pytest.fixture
def make_inputs(rng):
    """Factory for random per-head Q, K, V of shape n x d."""
    def _make(n=16, d=4, scale=1.0):
        q, k, v = (rng.normal(scale=scale, size=(n, d)) for _ in range(3))
        return AttentionInputs(DenseMatrix(q), DenseMatrix(k), DenseMatrix(v))
    return _make


@pytest.fixture
def dense_softmax():
    """Plain numpy reference for row softmax of q k^T / sqrt(d)."""
    def _softmax(q, k):
        scores = q @ k.T / np.sqrt(q.shape[1])
        e = np.exp(scores - scores.max(axis=1, keepdims=True))
        return e / e.sum(axis=1, keepdims=True)
    return _softmax


@pytest.fixture
def out_dir(tmp_path):
    path = tmp_path / "out"
    path.mkdir()
    return path


@pytest.fixture
def sample_config_text():
    """Config file content for a small custom run."""
    return """# small custom model
preset = custom
blocks = 2,2
k_list = 16,4
heads = 2
channels = 8
window = 4

variant = pfa
seed = 3
height = 8
width = 10
"""
