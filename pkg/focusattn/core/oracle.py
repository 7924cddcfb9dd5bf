# focusattn/core/oracle.py

"""
Dense masked-replay reference for the sparse pipeline.

Everything here works on plain N x N arrays with boolean masks and explicit
pixel index arithmetic. It shares no code with the CSR kernels or with the
reshape-based window partitioner, so agreement between the two paths is a
meaningful check.
"""

from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from focusattn.core.presets import LayerWeights, ModelPreset, k_for_layer

# same underflow floor as the sparse path; a masked-in entry never becomes zero
_FLOOR = np.finfo(np.float64).tiny


@dataclass
class OracleStep:
    attention: np.ndarray
    mask: np.ndarray
    output: np.ndarray


def dense_softmax_under_mask(scores: np.ndarray, mask: np.ndarray) -> np.ndarray:
    masked = np.where(mask, scores, -np.inf)
    peak = masked.max(axis=1, keepdims=True)
    e = np.where(mask, np.exp(masked - peak), 0.0)
    p = e / e.sum(axis=1, keepdims=True)
    return np.where(mask, np.maximum(p, _FLOOR), 0.0)


def dense_topk_mask(values: np.ndarray, allowed: np.ndarray, k: int) -> np.ndarray:
    """k largest allowed entries per row, lower column first among ties."""
    order = np.argsort(np.where(allowed, -values, np.inf), axis=1, kind="stable")
    rank = np.empty_like(order)
    np.put_along_axis(rank, order, np.broadcast_to(np.arange(values.shape[1]), order.shape), axis=1)
    return allowed & (rank < k)


def dense_pfa_step(q: np.ndarray, k: np.ndarray, v: np.ndarray, attention: np.ndarray,
                   mask: np.ndarray, k_l: int, renormalize_after_topk: bool = False) -> OracleStep:
    scores = (q @ k.T) / np.sqrt(q.shape[1])
    calculated = dense_softmax_under_mask(scores, mask)
    product = np.where(mask, np.maximum(calculated * attention, _FLOOR), 0.0)
    normalized = product / product.sum(axis=1, keepdims=True)
    keep = dense_topk_mask(normalized, mask, k_l)
    attention = np.where(keep, normalized, 0.0)
    if renormalize_after_topk:
        trimmed = keep.sum(axis=1) < mask.sum(axis=1)
        attention[trimmed] /= attention[trimmed].sum(axis=1, keepdims=True)
    return OracleStep(attention, attention > 0, attention @ v)


def oracle_pfa_chain(steps: Sequence[Tuple[np.ndarray, np.ndarray, np.ndarray]],
                     ks: Sequence[int], renormalize_after_topk: bool = False) -> List[OracleStep]:
    """Replay a chain of PFA steps from the all-ones start with dense arrays."""
    n = steps[0][0].shape[0]
    attention = np.ones((n, n))
    mask = np.ones((n, n), dtype=bool)
    replay = []
    for (q, k, v), k_l in zip(steps, ks):
        step = dense_pfa_step(q, k, v, attention, mask, k_l, renormalize_after_topk)
        attention, mask = step.attention, step.mask
        replay.append(step)
    return replay


def _window_pixels(hp: int, wp: int, window_size: int, shift: Tuple[int, int]):
    """(rows, cols) of every window's pixels in padded coordinates, row-major."""
    dy, dx = shift
    local = np.arange(window_size)
    windows = []
    for gy in range(hp // window_size):
        for gx in range(wp // window_size):
            ys = (gy * window_size + local + dy) % hp
            xs = (gx * window_size + local + dx) % wp
            windows.append((np.repeat(ys, window_size), np.tile(xs, window_size)))
    return windows


def oracle_cascade(preset: ModelPreset, weights: LayerWeights, values: np.ndarray,
                   renormalize_after_topk: bool = False) -> np.ndarray:
    """Replay a full PFA cascade over an h x w x c array; returns the output array."""
    h, w = values.shape[:2]
    ws = preset.window_size
    hp, wp = h + (-h) % ws, w + (-w) % ws
    n, dh = preset.tokens_per_window, preset.head_dim

    x = np.array(values, dtype=np.float64)
    chains = {}
    for layer in range(1, preset.total_layers + 1):
        parity = layer % 2
        shift = (0, 0) if parity == 1 else (ws // 2, ws // 2)
        padded = np.pad(x, ((0, hp - h), (0, wp - w), (0, 0)), mode="reflect")
        wq, wk, wv, wo = (m.values for m in weights.for_layer(layer))
        k_l = k_for_layer(preset, layer)

        out = np.empty_like(padded)
        windows = _window_pixels(hp, wp, ws, shift)
        state = chains.setdefault(parity, {})
        for index, (ys, xs) in enumerate(windows):
            tokens = padded[ys, xs]
            q_all, k_all, v_all = tokens @ wq, tokens @ wk, tokens @ wv
            mixed = np.empty_like(tokens)
            for head in range(preset.heads):
                cols = slice(head * dh, (head + 1) * dh)
                attention, mask = state.get((index, head), (np.ones((n, n)), np.ones((n, n), dtype=bool)))
                step = dense_pfa_step(q_all[:, cols], k_all[:, cols], v_all[:, cols], attention, mask,
                                      k_l, renormalize_after_topk)
                state[(index, head)] = (step.attention, step.mask)
                mixed[:, cols] = step.output
            out[ys, xs] = tokens + mixed @ wo
        x = out[:h, :w]
    return x
