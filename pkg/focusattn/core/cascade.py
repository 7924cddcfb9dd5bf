# focusattn/core/cascade.py

"""
Stacks attention layers per a ModelPreset and threads the two parity chains
(unshifted odd layers, shifted even layers) through the network.

Each layer: parity shift -> partition -> per (window, head) attention ->
output projection + residual -> merge. Windows are independent and may run on
a thread pool; results land in slots indexed by window, so the output and the
trace do not depend on the thread count.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Tuple

import numpy as np

from focusattn.core.attention import (
    AttentionInputs,
    pfa_step,
    progressive_attention_step,
    topk_attention,
    vanilla_attention,
)
from focusattn.core.debug_logger import debug_log
from focusattn.core.errors import FocusAttentionError, GeometryError, ShapeMismatchError
from focusattn.core.history_tracker import LayerCommand
from focusattn.core.presets import LayerWeights, ModelPreset, k_for_layer
from focusattn.core.structures import DenseMatrix, IndexMask, RowSparseMatrix
from focusattn.core.windows import FeatureMap, WindowBatch, merge, parity_shift, partition


class Variant(str, Enum):
    VANILLA = "vanilla"
    TOPK = "topk"
    PROGRESSIVE = "progressive"
    PFA = "pfa"


CHAINED_VARIANTS = (Variant.PROGRESSIVE, Variant.PFA)


def parity_name(layer: int) -> str:
    return "odd" if layer % 2 == 1 else "even"


@dataclass
class ChainState:
    """Inherited (A, I) per (window, head) for one parity pathway."""

    parity: str
    num_windows: int
    heads: int
    tokens: int
    padded_hw: Tuple[int, int]
    initial: RowSparseMatrix
    attention: List[List[Optional[RowSparseMatrix]]] = field(default_factory=list)
    masks: List[List[Optional[IndexMask]]] = field(default_factory=list)
    layers_consumed: int = 0

    @classmethod
    def start(cls, parity: str, batch: WindowBatch, heads: int,
              initial: RowSparseMatrix) -> "ChainState":
        slots = [[None] * heads for _ in range(batch.num_windows)]
        return cls(parity, batch.num_windows, heads, batch.tokens_per_window, batch.padded_hw,
                   initial, slots, [row[:] for row in slots])

    def check_alignment(self, batch: WindowBatch) -> None:
        if (batch.num_windows, batch.tokens_per_window, batch.padded_hw) != \
                (self.num_windows, self.tokens, self.padded_hw):
            raise GeometryError(
                f"{self.parity} chain was built for {self.num_windows} windows of {self.tokens} tokens "
                f"on a {self.padded_hw} grid; layer has {batch.num_windows} windows on {batch.padded_hw}"
            )

    def previous(self, window: int, head: int) -> Tuple[RowSparseMatrix, IndexMask]:
        a = self.attention[window][head]
        if a is None:
            return self.initial, self.initial.mask()
        return a, self.masks[window][head]

    def advance(self, updates: List[List[Tuple[RowSparseMatrix, IndexMask]]]) -> None:
        for w, per_head in enumerate(updates):
            for h, (a, mask) in enumerate(per_head):
                self.attention[w][h] = a
                self.masks[w][h] = mask
        self.layers_consumed += 1


@dataclass
class LayerTrace:
    """Statistics of one layer; every array is indexed [window, head]."""

    layer: int
    block: int
    parity: str
    shift: Tuple[int, int]
    k: Optional[int]
    mean_support: np.ndarray
    max_support: np.ndarray
    row_sum_min: np.ndarray
    row_sum_max: np.ndarray
    mean_entropy: np.ndarray
    overlap: np.ndarray
    score_macs: np.ndarray
    aggregate_macs: np.ndarray
    projection_macs: int
    captured_row: Optional[np.ndarray] = None

    @property
    def score_macs_total(self) -> int:
        return int(self.score_macs.sum())

    @property
    def aggregate_macs_total(self) -> int:
        return int(self.aggregate_macs.sum())


@dataclass
class CascadeTrace:
    variant: Variant
    preset_name: str
    h: int
    w: int
    padded_hw: Tuple[int, int]
    channels: int
    window_size: int
    heads: int
    head_dim: int
    tokens_per_window: int
    num_windows: int
    renormalize_after_topk: bool
    k_schedule: List[int]
    topk_k: Optional[int] = None
    layers: List[LayerTrace] = field(default_factory=list)
    history: List[dict] = field(default_factory=list)

    @property
    def total_layers(self) -> int:
        return len(self.layers)

    def layer(self, index: int) -> LayerTrace:
        return self.layers[index - 1]

    def same_parity_parent(self, index: int) -> Optional[LayerTrace]:
        return self.layers[index - 3] if index > 2 else None


def attention_row_stats(attention: RowSparseMatrix, parent: Optional[IndexMask]) -> Dict[str, float]:
    """Support, row-sum, entropy and parent-overlap statistics of one map."""
    counts = attention.row_nnz()
    row_ids = attention.row_ids()
    sums = attention.row_sums()
    p = attention.data / sums[row_ids]
    entropy = -np.bincount(row_ids, weights=p * np.log(p), minlength=attention.rows)
    if parent is None:
        overlap = float("nan")
    else:
        inside = np.isin(attention.keys(), parent.keys(), assume_unique=True)
        overlap = float(np.mean(np.bincount(row_ids, weights=inside, minlength=attention.rows) / counts))
    return {
        "mean_support": float(counts.mean()),
        "max_support": int(counts.max()),
        "row_sum_min": float(sums.min()),
        "row_sum_max": float(sums.max()),
        "mean_entropy": float(entropy.mean()),
        "overlap": overlap,
    }


@dataclass
class _LayerContext:
    layer: int
    variant: Variant
    weights: Tuple[DenseMatrix, DenseMatrix, DenseMatrix, DenseMatrix]
    heads: int
    head_dim: int
    k: Optional[int]
    topk_k: Optional[int]
    renormalize_after_topk: bool
    chain: Optional[ChainState]
    capture: Optional[Tuple[int, int, int]]


@dataclass
class _WindowOutcome:
    tokens: np.ndarray
    stats: List[Dict[str, float]]
    score_macs: List[int]
    aggregate_macs: List[int]
    states: List[Tuple[RowSparseMatrix, IndexMask]]
    captured_row: Optional[np.ndarray]


def _window_step(ctx: _LayerContext, window: int, tokens: np.ndarray) -> _WindowOutcome:
    wq, wk, wv, wo = (m.values for m in ctx.weights)
    q_all, k_all, v_all = tokens @ wq, tokens @ wk, tokens @ wv
    mixed = np.empty_like(tokens)
    outcome = _WindowOutcome(tokens, [], [], [], [], None)

    for head in range(ctx.heads):
        cols = slice(head * ctx.head_dim, (head + 1) * ctx.head_dim)
        inputs = AttentionInputs(DenseMatrix(q_all[:, cols]), DenseMatrix(k_all[:, cols]),
                                 DenseMatrix(v_all[:, cols]))
        parent_mask = None
        if ctx.variant is Variant.VANILLA:
            result = vanilla_attention(inputs)
        elif ctx.variant is Variant.TOPK:
            result = topk_attention(inputs, ctx.topk_k)
        else:
            previous, previous_mask = ctx.chain.previous(window, head)
            if ctx.chain.layers_consumed:
                parent_mask = previous_mask
            if ctx.variant is Variant.PROGRESSIVE:
                result = progressive_attention_step(inputs, previous)
                outcome.states.append((result.attention, result.attention.mask()))
            else:
                result = pfa_step(inputs, previous, previous_mask, ctx.k, ctx.renormalize_after_topk)
                outcome.states.append((result.attention, result.mask))

        mixed[:, cols] = result.output.values
        outcome.stats.append(attention_row_stats(result.attention, parent_mask))
        outcome.score_macs.append(result.macs_scores)
        outcome.aggregate_macs.append(result.macs_aggregate)
        if ctx.capture is not None and ctx.capture[:2] == (window, head):
            row = np.zeros(result.attention.cols)
            columns, weights = result.attention.row(ctx.capture[2])
            row[columns] = weights
            outcome.captured_row = row

    outcome.tokens = tokens + mixed @ wo
    return outcome


class FocusCascade:
    """Runs a preset's layers over feature maps and records a trace and history."""

    def __init__(self, preset: ModelPreset, weights: LayerWeights, variant: Variant = Variant.PFA,
                 renormalize_after_topk: bool = False, threads: int = 1,
                 topk_k: Optional[int] = None, capture: Optional[Tuple[int, int, int]] = None):
        debug_log(f"Initializing FocusCascade: preset={preset.name} variant={Variant(variant).value} "
                  f"threads={threads}", "CASCADE")
        if weights.channels != preset.channels or len(weights.layers) != preset.total_layers:
            raise ShapeMismatchError(
                f"weights cover {len(weights.layers)} layers of C={weights.channels}, "
                f"preset needs {preset.total_layers} layers of C={preset.channels}"
            )
        n = preset.tokens_per_window
        if capture is not None:
            window, head, row = capture
            if not (0 <= head < preset.heads and 0 <= row < n and window >= 0):
                raise FocusAttentionError(
                    f"invalid row selection (window={window}, head={head}, row={row}) "
                    f"for {preset.heads} heads and {n} tokens per window"
                )
        if topk_k is not None and not 1 <= topk_k <= n:
            raise FocusAttentionError(f"top-k attention needs 1 <= k <= {n}, got {topk_k}")
        self.preset = preset
        self.weights = weights
        self.variant = Variant(variant)
        self.renormalize_after_topk = renormalize_after_topk
        self.threads = max(1, int(threads))
        self.topk_k = topk_k
        self.capture = capture
        self.history: List[dict] = []
        self.chains: Dict[str, ChainState] = {}
        self._trace: Optional[CascadeTrace] = None
        self._pool: Optional[ThreadPoolExecutor] = None

    def _initial_map(self) -> RowSparseMatrix:
        n = self.preset.tokens_per_window
        # progressive steps expect row-stochastic inputs; under Norm both are neutral
        if self.variant is Variant.PROGRESSIVE:
            return RowSparseMatrix.uniform(n)
        return RowSparseMatrix.ones(n)

    def run(self, f: FeatureMap) -> Tuple[FeatureMap, CascadeTrace]:
        preset = self.preset
        if f.c != preset.channels:
            raise ShapeMismatchError(f"feature map has {f.c} channels, preset expects {preset.channels}")
        probe = partition(f, preset.window_size)
        if self.capture is not None and self.capture[0] >= probe.num_windows:
            raise FocusAttentionError(
                f"invalid row selection: window {self.capture[0]} of {probe.num_windows}"
            )
        self.chains = {}
        self.history = []
        self._trace = CascadeTrace(
            variant=self.variant, preset_name=preset.name, h=f.h, w=f.w, padded_hw=probe.padded_hw,
            channels=preset.channels, window_size=preset.window_size, heads=preset.heads,
            head_dim=preset.head_dim, tokens_per_window=preset.tokens_per_window,
            num_windows=probe.num_windows, renormalize_after_topk=self.renormalize_after_topk,
            k_schedule=[k_for_layer(preset, l) for l in range(1, preset.total_layers + 1)],
            topk_k=(self.topk_k or max(1, preset.tokens_per_window // 2))
            if self.variant is Variant.TOPK else None,
            history=self.history,
        )
        step = LayerCommand(function=self.run_layer, history_list=self.history)

        x = f
        with ThreadPoolExecutor(max_workers=self.threads) as pool:
            self._pool = pool
            for layer in range(1, preset.total_layers + 1):
                x = step(layer, x, variant=self.variant,
                         shift=parity_shift(layer, preset.window_size),
                         k=k_for_layer(preset, layer))
        self._pool = None
        debug_log(f"Cascade finished: {preset.total_layers} layers, output shape {x.shape}", "CASCADE")
        return x, self._trace

    def run_layer(self, layer: int, x: FeatureMap, variant: Variant, shift: Tuple[int, int],
                  k: int) -> FeatureMap:
        preset = self.preset
        batch = partition(x, preset.window_size, shift)
        parity = parity_name(layer)

        chain = None
        if variant in CHAINED_VARIANTS:
            chain = self.chains.get(parity)
            if chain is None:
                chain = ChainState.start(parity, batch, preset.heads, self._initial_map())
                self.chains[parity] = chain
            chain.check_alignment(batch)

        ctx = _LayerContext(
            layer=layer, variant=variant, weights=self.weights.for_layer(layer),
            heads=preset.heads, head_dim=preset.head_dim, k=k, topk_k=self.topk_k,
            renormalize_after_topk=self.renormalize_after_topk, chain=chain,
            capture=self.capture,
        )
        windows = range(batch.num_windows)
        if self._pool is not None and self.threads > 1 and batch.num_windows > 1:
            outcomes = list(self._pool.map(lambda w: _window_step(ctx, w, batch.tokens[w]), windows))
        else:
            outcomes = [_window_step(ctx, w, batch.tokens[w]) for w in windows]

        if chain is not None:
            chain.advance([o.states for o in outcomes])

        self._trace.layers.append(self._layer_trace(layer, parity, shift, k, batch, outcomes))
        debug_log(f"Layer {layer} ({parity}, shift={shift}, K={k}): "
                  f"score MACs={self._trace.layers[-1].score_macs_total}", "CASCADE")
        return merge(batch.with_tokens(np.stack([o.tokens for o in outcomes])))

    def _layer_trace(self, layer, parity, shift, k, batch, outcomes) -> LayerTrace:
        def grid(key, dtype=np.float64):
            return np.array([[s[key] for s in o.stats] for o in outcomes], dtype=dtype)

        n, c = batch.tokens_per_window, batch.channels
        captured = None
        if self.capture is not None:
            captured = outcomes[self.capture[0]].captured_row
        return LayerTrace(
            layer=layer,
            block=self.preset.block_of_layer(layer) + 1,
            parity=parity,
            shift=shift,
            k=k if self.variant is Variant.PFA else None,
            mean_support=grid("mean_support"),
            max_support=grid("max_support", np.int64),
            row_sum_min=grid("row_sum_min"),
            row_sum_max=grid("row_sum_max"),
            mean_entropy=grid("mean_entropy"),
            overlap=grid("overlap"),
            score_macs=np.array([o.score_macs for o in outcomes], dtype=np.int64),
            aggregate_macs=np.array([o.aggregate_macs for o in outcomes], dtype=np.int64),
            projection_macs=4 * batch.num_windows * n * c * c,
            captured_row=captured,
        )


def run_cascade(preset: ModelPreset, weights: LayerWeights, f: FeatureMap,
                variant: Variant = Variant.PFA, renormalize_after_topk: bool = False,
                threads: int = 1, topk_k: Optional[int] = None,
                capture: Optional[Tuple[int, int, int]] = None) -> Tuple[FeatureMap, CascadeTrace]:
    """Run every layer of the preset over f; returns the output map and its trace."""
    cascade = FocusCascade(preset, weights, variant, renormalize_after_topk, threads, topk_k, capture)
    return cascade.run(f)
