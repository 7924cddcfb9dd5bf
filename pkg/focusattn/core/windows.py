# focusattn/core/windows.py

"""Window partitioning with cyclic shift, and its exact inverse."""

from dataclasses import InitVar, dataclass
from typing import Tuple

import numpy as np

from focusattn.core.errors import FocusAttentionError, GeometryError, ShapeMismatchError

Shift = Tuple[int, int]


@dataclass(frozen=True, eq=False)
class FeatureMap:
    """h x w x c feature map, channel-last float64."""

    values: np.ndarray
    copy: InitVar[bool] = True

    def __post_init__(self, copy: bool):
        arr = np.array(self.values, dtype=np.float64, copy=True) if copy else \
            np.ascontiguousarray(self.values, dtype=np.float64)
        if arr.ndim != 3:
            raise ShapeMismatchError(f"FeatureMap needs an h x w x c array, got shape {arr.shape}")
        if not np.isfinite(arr).all():
            raise FocusAttentionError("FeatureMap values must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @property
    def h(self) -> int:
        return self.values.shape[0]

    @property
    def w(self) -> int:
        return self.values.shape[1]

    @property
    def c(self) -> int:
        return self.values.shape[2]

    @property
    def shape(self) -> Tuple[int, int, int]:
        return self.values.shape


@dataclass(frozen=True, eq=False)
class WindowBatch:
    """Feature map cut into W x W windows; tokens[i] is window i's N x c token matrix."""

    window_size: int
    shift: Shift
    tokens: np.ndarray
    original_hw: Tuple[int, int]
    padded_hw: Tuple[int, int]

    @property
    def num_windows(self) -> int:
        return self.tokens.shape[0]

    @property
    def tokens_per_window(self) -> int:
        return self.tokens.shape[1]

    @property
    def channels(self) -> int:
        return self.tokens.shape[2]

    @property
    def grid(self) -> Tuple[int, int]:
        return (self.padded_hw[0] // self.window_size, self.padded_hw[1] // self.window_size)

    def with_tokens(self, tokens: np.ndarray) -> "WindowBatch":
        if tokens.shape[:2] != self.tokens.shape[:2]:
            raise ShapeMismatchError(f"token block {tokens.shape} does not fit batch {self.tokens.shape}")
        return WindowBatch(self.window_size, self.shift, tokens, self.original_hw, self.padded_hw)


def padded_size(h: int, w: int, window_size: int) -> Tuple[int, int]:
    return (h + (-h) % window_size, w + (-w) % window_size)


def partition(f: FeatureMap, window_size: int, shift: Shift = (0, 0)) -> WindowBatch:
    """Reflection-pad to window multiples, cyclically shift by -shift, cut row-major windows.

    Maps smaller than one window are padded up to it; numpy reflects repeatedly
    when the pad is wider than the map.
    """
    if window_size < 2:
        raise GeometryError(f"window_size must be >= 2, got {window_size}")
    hp, wp = padded_size(f.h, f.w, window_size)
    x = f.values
    if (hp, wp) != (f.h, f.w):
        x = np.pad(x, ((0, hp - f.h), (0, wp - f.w), (0, 0)), mode="reflect")
    dy, dx = shift
    if dy or dx:
        x = np.roll(x, shift=(-dy, -dx), axis=(0, 1))
    ws = window_size
    tokens = (
        x.reshape(hp // ws, ws, wp // ws, ws, f.c)
        .transpose(0, 2, 1, 3, 4)
        .reshape(-1, ws * ws, f.c)
    )
    return WindowBatch(ws, (dy, dx), np.ascontiguousarray(tokens), (f.h, f.w), (hp, wp))


def merge(b: WindowBatch) -> FeatureMap:
    """Inverse of partition: reassemble, undo the shift, strip padding."""
    ws = b.window_size
    gh, gw = b.grid
    if b.num_windows != gh * gw or b.tokens_per_window != ws * ws:
        raise GeometryError("window batch is internally inconsistent")
    x = (
        b.tokens.reshape(gh, gw, ws, ws, b.channels)
        .transpose(0, 2, 1, 3, 4)
        .reshape(b.padded_hw[0], b.padded_hw[1], b.channels)
    )
    dy, dx = b.shift
    if dy or dx:
        x = np.roll(x, shift=(dy, dx), axis=(0, 1))
    h, w = b.original_hw
    return FeatureMap(x[:h, :w], copy=True)


def parity_shift(layer_index: int, window_size: int) -> Shift:
    """(0, 0) on odd layers, (W/2, W/2) on even layers (1-based)."""
    if layer_index < 1:
        raise GeometryError(f"layer_index is 1-based, got {layer_index}")
    if layer_index % 2 == 1:
        return (0, 0)
    return (window_size // 2, window_size // 2)


def window_assignment(h: int, w: int, window_size: int, shift: Shift) -> np.ndarray:
    """Window id of every padded pixel, in unshifted pixel coordinates."""
    hp, wp = padded_size(h, w, window_size)
    gw = wp // window_size
    rows = ((np.arange(hp) - shift[0]) % hp) // window_size
    cols = ((np.arange(wp) - shift[1]) % wp) // window_size
    return rows[:, None] * gw + cols[None, :]
