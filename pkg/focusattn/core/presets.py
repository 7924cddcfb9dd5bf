# focusattn/core/presets.py

"""Architecture presets, seeded layer weights and the focus schedule K^l."""

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple, Union

from focusattn.core.debug_logger import debug_log
from focusattn.core.dense_ops import Distribution, seeded_fill
from focusattn.core.errors import ConfigError
from focusattn.core.structures import DenseMatrix

# Below this focus ratio the retained set shrinks so fast that early layers
# decide for the whole network.
ALPHA_WARNING_THRESHOLD = Fraction(1, 10)

_SEED_MIX = 0x9E3779B97F4A7C15


class FocusMode(str, Enum):
    PER_BLOCK = "per_block_list"
    GEOMETRIC = "geometric"


def as_fraction(alpha: Union[Fraction, float, str, int]) -> Fraction:
    """Exact rational focus ratio; floats go through their shortest repr (0.5 -> 1/2)."""
    if isinstance(alpha, Fraction):
        return alpha
    if isinstance(alpha, float):
        return Fraction(repr(alpha))
    return Fraction(alpha)


def round_half_up(x: Fraction) -> int:
    return math.floor(x + Fraction(1, 2))


@dataclass(frozen=True)
class ModelPreset:
    name: str
    blocks: Tuple[Tuple[int, int], ...]
    heads: int
    channels: int
    window_size: int
    focus_mode: FocusMode = FocusMode.PER_BLOCK
    alpha: Optional[Fraction] = None

    def __post_init__(self):
        object.__setattr__(self, "blocks", tuple((int(n), int(k)) for n, k in self.blocks))
        object.__setattr__(self, "focus_mode", FocusMode(self.focus_mode))
        if self.alpha is not None:
            object.__setattr__(self, "alpha", as_fraction(self.alpha))
        problems = self.violations()
        if problems:
            raise ConfigError(f"invalid preset '{self.name}': " + "; ".join(problems))

    def violations(self) -> List[str]:
        problems = []
        if self.heads < 1:
            problems.append(f"heads must be >= 1 (got {self.heads})")
        elif self.channels % self.heads:
            problems.append(f"channels {self.channels} not divisible by heads {self.heads}")
        if self.channels < 1:
            problems.append(f"channels must be >= 1 (got {self.channels})")
        if self.window_size < 2:
            problems.append(f"window size must be >= 2 (got {self.window_size})")
        if not self.blocks:
            problems.append("at least one block is required")
        layer_counts = [n for n, _ in self.blocks]
        ks = [k for _, k in self.blocks]
        if any(n < 1 for n in layer_counts):
            problems.append(f"every block needs >= 1 layer (got {layer_counts})")
        if any(k < 1 for k in ks):
            problems.append(f"K values must be positive (got {ks})")
        if any(b > a for a, b in zip(ks, ks[1:])):
            problems.append(f"K values must be nonincreasing across blocks (got {ks})")
        if self.focus_mode is FocusMode.GEOMETRIC:
            if self.alpha is None or not 0 < self.alpha < 1:
                problems.append(f"geometric focus needs 0 < alpha < 1 (got {self.alpha})")
        return problems

    @property
    def head_dim(self) -> int:
        return self.channels // self.heads

    @property
    def tokens_per_window(self) -> int:
        return self.window_size * self.window_size

    @property
    def layer_counts(self) -> List[int]:
        return [n for n, _ in self.blocks]

    @property
    def k_list(self) -> List[int]:
        return [k for _, k in self.blocks]

    @property
    def total_layers(self) -> int:
        return sum(self.layer_counts)

    def block_of_layer(self, global_layer: int) -> int:
        """0-based block index of a 1-based global layer."""
        if not 1 <= global_layer <= self.total_layers:
            raise ConfigError(f"layer {global_layer} outside 1..{self.total_layers}")
        end = 0
        for index, count in enumerate(self.layer_counts):
            end += count
            if global_layer <= end:
                return index
        raise AssertionError("unreachable")


NAMED_PRESETS: Dict[str, ModelPreset] = {
    "pft": ModelPreset(
        name="pft",
        blocks=tuple(zip([4, 4, 4, 6, 6, 6], [1024, 256, 128, 64, 32, 16])),
        heads=6,
        channels=240,
        window_size=32,
    ),
    "pft_light": ModelPreset(
        name="pft_light",
        blocks=tuple(zip([2, 4, 6, 6, 6], [1024, 256, 128, 64, 32])),
        heads=4,
        channels=52,
        window_size=32,
    ),
    # pft_light structure at the 16x16 window the ablations use, K scaled to N = 256
    "desk": ModelPreset(
        name="desk",
        blocks=tuple(zip([2, 4, 6, 6, 6], [256, 64, 32, 16, 8])),
        heads=4,
        channels=52,
        window_size=16,
    ),
}


@dataclass(frozen=True, eq=False)
class LayerWeights:
    """Per-layer projections W_q, W_k, W_v, W_o, each C x C."""

    seed: int
    channels: int
    layers: Tuple[Tuple[DenseMatrix, DenseMatrix, DenseMatrix, DenseMatrix], ...] = field(repr=False)

    def for_layer(self, global_layer: int):
        return self.layers[global_layer - 1]


def derive_seed(seed: int, layer: int, slot: int) -> int:
    return (int(seed) * _SEED_MIX + layer * 4 + slot) % (1 << 64)


def build_weights(preset: ModelPreset, seed: int) -> LayerWeights:
    """uniform(-1/sqrt(C), 1/sqrt(C)) projections, one derived seed per matrix."""
    c = preset.channels
    bound = c ** -0.5
    layers = tuple(
        tuple(
            seeded_fill(c, c, derive_seed(seed, layer, slot), Distribution.UNIFORM, bound)
            for slot in range(4)
        )
        for layer in range(1, preset.total_layers + 1)
    )
    return LayerWeights(seed=seed, channels=c, layers=layers)


def custom_preset(blocks: Sequence[int], k_list: Optional[Sequence[int]], heads: int,
                  channels: int, window_size: int, alpha=None,
                  name: str = "custom") -> ModelPreset:
    """Preset from raw fields; alpha switches to geometric focus."""
    if alpha is not None:
        ks = list(k_list) if k_list else [window_size * window_size] * len(blocks)
        mode = FocusMode.GEOMETRIC
    else:
        if k_list is None or len(k_list) != len(blocks):
            raise ConfigError(
                f"per-block focus needs one K per block ({len(blocks)} blocks, "
                f"got {None if k_list is None else len(k_list)} K values)"
            )
        ks = list(k_list)
        mode = FocusMode.PER_BLOCK
    return ModelPreset(name=name, blocks=tuple(zip(blocks, ks)), heads=heads,
                       channels=channels, window_size=window_size,
                       focus_mode=mode, alpha=alpha)


def resolve_preset(name: str, **overrides) -> ModelPreset:
    """Named preset with optional field overrides (window_size, alpha, k_list, ...)."""
    overrides = {k: v for k, v in overrides.items() if v is not None}
    if name == "custom":
        overrides.setdefault("k_list", None)
        try:
            return custom_preset(**overrides)
        except TypeError as e:
            raise ConfigError(f"custom preset is missing fields: {e}")
    if name not in NAMED_PRESETS:
        raise ConfigError(f"unknown preset '{name}' (choose from {', '.join(NAMED_PRESETS)} or custom)")
    preset = NAMED_PRESETS[name]
    if not overrides:
        return preset
    blocks = overrides.pop("blocks", preset.layer_counts)
    k_list = overrides.pop("k_list", None)
    if k_list is None and len(blocks) == len(preset.k_list):
        k_list = preset.k_list
    return custom_preset(
        blocks=blocks,
        k_list=k_list,
        heads=overrides.pop("heads", preset.heads),
        channels=overrides.pop("channels", preset.channels),
        window_size=overrides.pop("window_size", preset.window_size),
        alpha=overrides.pop("alpha", None),
        name=f"{preset.name}*",
    )


def build_preset(name: str, seed: int = 0, **overrides) -> Tuple[ModelPreset, LayerWeights]:
    """Preset plus deterministic weights for the given seed."""
    preset = resolve_preset(name, **overrides)
    debug_log(f"Preset {preset.name}: blocks={list(preset.blocks)} heads={preset.heads} "
              f"C={preset.channels} W={preset.window_size} mode={preset.focus_mode.value}", "PRESETS")
    if preset.alpha is not None and preset.alpha < ALPHA_WARNING_THRESHOLD:
        debug_log(f"alpha={preset.alpha} is below {ALPHA_WARNING_THRESHOLD}; focusing may be premature",
                  "PRESETS", "WARNING")
    return preset, build_weights(preset, seed)


def k_for_layer(preset: ModelPreset, global_layer: int) -> int:
    """Retained entries per row at a 1-based global layer."""
    block = preset.block_of_layer(global_layer)
    if preset.focus_mode is FocusMode.PER_BLOCK:
        return preset.k_list[block]
    n = preset.tokens_per_window
    return max(1, round_half_up(n * preset.alpha ** (global_layer - 1)))


def k_schedule(preset: ModelPreset) -> List[int]:
    return [k_for_layer(preset, layer) for layer in range(1, preset.total_layers + 1)]


def with_full_schedule(preset: ModelPreset, layers: Optional[int] = None) -> ModelPreset:
    """Same architecture with K = N everywhere, optionally cut to the first `layers` layers.

    At K = N a PFA step reduces to Norm(softmax ⊙ inherited map): dense attention while each
    parity chain is on its first layer, progressive attention after that.
    """
    n = preset.tokens_per_window
    if layers is None:
        blocks = tuple((count, n) for count in preset.layer_counts)
    else:
        if not 1 <= layers <= preset.total_layers:
            raise ConfigError(f"layers must lie in 1..{preset.total_layers}, got {layers}")
        blocks = ((layers, n),)
    return replace(preset, name=f"{preset.name}-dense",
                   blocks=blocks,
                   focus_mode=FocusMode.PER_BLOCK, alpha=None)
