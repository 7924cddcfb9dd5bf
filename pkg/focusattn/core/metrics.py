# focusattn/core/metrics.py

"""
Analytic attention cost model, reconciliation against measured MAC counters,
and per-layer attention statistics.

Counting convention: one multiply-accumulate is one MAC. The closed forms
Omega(SA) = 4hwLC^2 + 2W^2hwLC and Omega(PFA) count the attention term as
score MACs plus aggregate MACs, so a layer's measured score MACs equal half
its attention term when the aggregate uses the same row width. FLOPs are
reported as 2 x MACs.
"""

from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import List, Optional, Sequence, Union

import numpy as np
import pandas as pd

from focusattn.core.cascade import CHAINED_VARIANTS, CascadeTrace, Variant
from focusattn.core.errors import ConfigError, GeometryError
from focusattn.core.presets import FocusMode, ModelPreset, as_fraction, k_schedule, round_half_up
from focusattn.core.windows import padded_size


class CostMode(str, Enum):
    SA = "sa"
    PFA_GEOMETRIC = "pfa_geometric"
    PFA_SCHEDULE = "pfa_schedule"


@dataclass(frozen=True)
class CostModelInput:
    h: int
    w: int
    channels: int
    window_size: int
    layers: int
    mode: CostMode = CostMode.SA
    alpha: Optional[Fraction] = None
    k_list: Optional[Sequence[int]] = None

    def __post_init__(self):
        object.__setattr__(self, "mode", CostMode(self.mode))
        if min(self.h, self.w, self.channels, self.window_size, self.layers) < 1:
            raise ConfigError(
                f"cost model needs positive h, w, C, W, L (got {self.h}, {self.w}, "
                f"{self.channels}, {self.window_size}, {self.layers})"
            )
        if self.mode is CostMode.PFA_GEOMETRIC:
            if self.alpha is None:
                raise ConfigError("pfa_geometric mode needs alpha")
            alpha = as_fraction(self.alpha)
            if not 0 < alpha < 1:
                raise ConfigError(f"alpha must lie in (0, 1), got {alpha}")
            object.__setattr__(self, "alpha", alpha)
        if self.mode is CostMode.PFA_SCHEDULE:
            if self.k_list is None or len(self.k_list) != self.layers:
                raise ConfigError(f"pfa_schedule mode needs one K per layer ({self.layers})")
            object.__setattr__(self, "k_list", tuple(int(k) for k in self.k_list))
            if min(self.k_list) < 1:
                raise ConfigError(f"K values must be positive, got {list(self.k_list)}")

    @property
    def tokens_per_window(self) -> int:
        return self.window_size * self.window_size

    @property
    def pixels(self) -> int:
        return self.h * self.w

    def k_for(self, layer: int) -> int:
        """Retained entries per row at a 1-based layer under this mode."""
        n = self.tokens_per_window
        if self.mode is CostMode.SA:
            return n
        if self.mode is CostMode.PFA_SCHEDULE:
            return self.k_list[layer - 1]
        return max(1, round_half_up(n * self.alpha ** (layer - 1)))

    def with_mode(self, mode: CostMode, **changes) -> "CostModelInput":
        fields = dict(h=self.h, w=self.w, channels=self.channels, window_size=self.window_size,
                      layers=self.layers, mode=mode, alpha=None, k_list=None)
        fields.update(changes)
        return CostModelInput(**fields)

    @classmethod
    def from_preset(cls, preset: ModelPreset, h: int, w: int,
                    padded: bool = False) -> "CostModelInput":
        """Cost input mirroring a preset's schedule; padded uses the window-multiple grid."""
        if padded:
            h, w = padded_size(h, w, preset.window_size)
        common = dict(h=h, w=w, channels=preset.channels, window_size=preset.window_size,
                      layers=preset.total_layers)
        if preset.focus_mode is FocusMode.GEOMETRIC:
            return cls(mode=CostMode.PFA_GEOMETRIC, alpha=preset.alpha, **common)
        return cls(mode=CostMode.PFA_SCHEDULE, k_list=k_schedule(preset), **common)


@dataclass(frozen=True)
class LayerCost:
    layer: int
    k: int
    projection_macs: int
    attention_term: int

    @property
    def score_macs(self) -> int:
        return self.attention_term // 2

    @property
    def total(self) -> int:
        return self.projection_macs + self.attention_term

    @property
    def flops(self) -> int:
        return 2 * self.total


def layer_costs(cost: CostModelInput) -> List[LayerCost]:
    """Per-layer terms 4hwC^2 and 2 K^l hwC of the closed form."""
    hw, c = cost.pixels, cost.channels
    return [
        LayerCost(layer, cost.k_for(layer), 4 * hw * c * c, 2 * cost.k_for(layer) * hw * c)
        for layer in range(1, cost.layers + 1)
    ]


def omega_sa(cost: CostModelInput) -> int:
    hw, c, n, big_l = cost.pixels, cost.channels, cost.tokens_per_window, cost.layers
    return 4 * hw * big_l * c * c + 2 * n * hw * big_l * c


def omega_pfa(cost: CostModelInput) -> int:
    if cost.mode is CostMode.SA:
        raise ConfigError("omega_pfa needs pfa_geometric or pfa_schedule mode")
    return sum(layer.total for layer in layer_costs(cost))


def reduction_ratio(cost: CostModelInput) -> Fraction:
    """Omega(PFA) / Omega(SA) as an exact rational."""
    return Fraction(omega_pfa(cost), omega_sa(cost.with_mode(CostMode.SA)))


def attention_reduction_ratio(cost: CostModelInput) -> Fraction:
    """Ratio of the attention terms alone: sum K^l / (L W^2)."""
    terms = layer_costs(cost)
    return Fraction(sum(t.k for t in terms), cost.layers * cost.tokens_per_window)


@dataclass(frozen=True)
class MacRow:
    layer: int
    analytic_score_macs: int
    measured_score_macs: int
    analytic_aggregate_macs: int
    measured_aggregate_macs: int

    @property
    def matches(self) -> bool:
        return (self.analytic_score_macs == self.measured_score_macs
                and self.analytic_aggregate_macs == self.measured_aggregate_macs)


@dataclass
class MacReport:
    variant: Variant
    rows: List[MacRow] = field(default_factory=list)
    sa_attention_macs: int = 0

    @property
    def measured_total(self) -> int:
        return sum(r.measured_score_macs + r.measured_aggregate_macs for r in self.rows)

    @property
    def analytic_total(self) -> int:
        return sum(r.analytic_score_macs + r.analytic_aggregate_macs for r in self.rows)

    @property
    def reduction_ratio(self) -> Fraction:
        return Fraction(self.measured_total, self.sa_attention_macs)

    @property
    def matches(self) -> bool:
        return all(r.matches for r in self.rows)

    def mismatches(self) -> List[MacRow]:
        return [r for r in self.rows if not r.matches]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [
                {
                    "layer": r.layer,
                    "analytic_score_macs": r.analytic_score_macs,
                    "measured_score_macs": r.measured_score_macs,
                    "analytic_aggregate_macs": r.analytic_aggregate_macs,
                    "measured_aggregate_macs": r.measured_aggregate_macs,
                    "score_flops": 2 * r.measured_score_macs,
                }
                for r in self.rows
            ]
        )


def _check_geometry(trace: CascadeTrace, cost: CostModelInput) -> None:
    expected = (trace.padded_hw[0], trace.padded_hw[1], trace.channels, trace.window_size,
                trace.total_layers)
    got = (cost.h, cost.w, cost.channels, cost.window_size, cost.layers)
    if got != expected:
        raise GeometryError(
            f"cost input (h, w, C, W, L) = {got} does not match the trace's padded geometry {expected}"
        )


def reconcile(trace: CascadeTrace, cost: CostModelInput) -> MacReport:
    """Compare each layer's measured MAC counters with the schedule arithmetic.

    The cost input must describe the trace's padded grid. Chained variants
    inherit their score support from the previous layer of the same parity;
    each parity's first layer computes full rows.
    """
    _check_geometry(trace, cost)
    n = trace.tokens_per_window
    per_width = cost.pixels * cost.channels
    chained = trace.variant in CHAINED_VARIANTS and cost.mode is not CostMode.SA

    report = MacReport(variant=trace.variant, sa_attention_macs=2 * n * per_width * cost.layers)
    support = {"odd": n, "even": n}
    for layer_trace in trace.layers:
        parity = layer_trace.parity
        if chained:
            score_width = support[parity]
            aggregate_width = min(cost.k_for(layer_trace.layer), score_width)
            support[parity] = aggregate_width
        else:
            score_width = n
            aggregate_width = min(trace.topk_k, n) if trace.topk_k else n
        report.rows.append(
            MacRow(
                layer=layer_trace.layer,
                analytic_score_macs=score_width * per_width,
                measured_score_macs=layer_trace.score_macs_total,
                analytic_aggregate_macs=aggregate_width * per_width,
                measured_aggregate_macs=layer_trace.aggregate_macs_total,
            )
        )
    return report


@dataclass(frozen=True)
class LayerStats:
    layer: int
    parity: str
    mean_support: float
    max_support: int
    mean_entropy: float
    overlap: float
    row_sum_min: float
    row_sum_max: float


def attention_stats(trace: CascadeTrace) -> List[LayerStats]:
    """Per-layer support, entropy and parent-overlap summaries over all windows and heads."""
    if not trace.layers:
        raise ConfigError("attention_stats needs a non-empty trace")
    stats = []
    for t in trace.layers:
        overlap = float(np.mean(t.overlap)) if not np.isnan(t.overlap).all() else float("nan")
        stats.append(
            LayerStats(
                layer=t.layer,
                parity=t.parity,
                mean_support=float(np.mean(t.mean_support)),
                max_support=int(np.max(t.max_support)),
                mean_entropy=float(np.mean(t.mean_entropy)),
                overlap=overlap,
                row_sum_min=float(np.min(t.row_sum_min)),
                row_sum_max=float(np.max(t.row_sum_max)),
            )
        )
    return stats


STATS_COLUMNS = ["layer", "parity", "head", "mean_support", "max_support", "mean_entropy",
                 "score_macs", "aggregate_macs"]


def stats_frame(trace: CascadeTrace) -> pd.DataFrame:
    """One row per (layer, head), aggregated over windows."""
    records = []
    for t in trace.layers:
        for head in range(trace.heads):
            records.append(
                {
                    "layer": t.layer,
                    "parity": t.parity,
                    "head": head,
                    "mean_support": float(np.mean(t.mean_support[:, head])),
                    "max_support": int(np.max(t.max_support[:, head])),
                    "mean_entropy": float(np.mean(t.mean_entropy[:, head])),
                    "score_macs": int(np.sum(t.score_macs[:, head])),
                    "aggregate_macs": int(np.sum(t.aggregate_macs[:, head])),
                }
            )
    return pd.DataFrame.from_records(records, columns=STATS_COLUMNS)


def nonincreasing_within_parity(values: Sequence[Union[int, float]], parities: Sequence[str],
                                tolerance: float = 0.0) -> bool:
    """True when each parity's subsequence never grows by more than tolerance."""
    last = {}
    for value, parity in zip(values, parities):
        if parity in last and value > last[parity] + tolerance:
            return False
        last[parity] = value
    return True
