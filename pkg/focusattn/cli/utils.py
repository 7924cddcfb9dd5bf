# focusattn/cli/utils.py

from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np
import pandas as pd
from rich.console import Console
from rich.panel import Panel
from rich.table import Table

from focusattn.core.metrics import LayerCost, LayerStats
from focusattn.core.presets import ModelPreset
from focusattn.core.verification import VerificationReport
from .config import CSV_FLOAT_FORMAT, MESSAGES

console = Console()


def save_frame(frame: pd.DataFrame, path: Path, quiet: bool = False) -> Path:
    """CSV with a fixed float format so reruns are byte-identical."""
    frame.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n")
    if not quiet:
        console.print(MESSAGES["saved"].format(path=path), style="green")
    return path


def show_preset(preset: ModelPreset, ks: Optional[Sequence[int]] = None):
    table = Table(title=f"Preset {preset.name}", show_header=True, header_style="bold magenta")
    table.add_column("Property", style="cyan")
    table.add_column("Value", style="white")
    table.add_row("Blocks (layers)", ", ".join(str(n) for n in preset.layer_counts))
    table.add_row("Heads / channels", f"{preset.heads} / {preset.channels} (head dim {preset.head_dim})")
    table.add_row("Window", f"{preset.window_size}x{preset.window_size} (N = {preset.tokens_per_window})")
    if preset.alpha is not None:
        table.add_row("Focus", f"geometric, alpha = {preset.alpha}")
    else:
        table.add_row("Focus", "per block: " + ", ".join(str(k) for k in preset.k_list))
    if ks is not None:
        table.add_row("K per layer", ", ".join(str(k) for k in ks))
    console.print(table)


def _fmt_overlap(value: float) -> str:
    return "-" if np.isnan(value) else f"{value:.3f}"


def show_layer_stats(stats: List[LayerStats], ks: Sequence[Optional[int]], title: str = "Layer statistics"):
    table = Table(title=title, show_header=True, header_style="bold magenta")
    for name in ("Layer", "Parity", "K", "Mean support", "Max support", "Mean entropy", "Overlap",
                 "Row sums"):
        table.add_column(name, justify="right")
    for s, k in zip(stats, ks):
        table.add_row(str(s.layer), s.parity, "-" if k is None else str(k), f"{s.mean_support:.2f}",
                      str(s.max_support), f"{s.mean_entropy:.4f}", _fmt_overlap(s.overlap),
                      f"[{s.row_sum_min:.6f}, {s.row_sum_max:.6f}]")
    console.print(table)


def show_costs(costs: List[LayerCost]):
    table = Table(title="Per-layer attention cost", show_header=True, header_style="bold magenta")
    for name in ("Layer", "K", "Projection MACs", "Attention term", "Score MACs", "FLOPs", "vs layer 1"):
        table.add_column(name, justify="right")
    first = costs[0].k
    for c in costs:
        table.add_row(str(c.layer), str(c.k), f"{c.projection_macs:,}", f"{c.attention_term:,}",
                      f"{c.score_macs:,}", f"{c.flops:,}", f"{100 * c.k / first:.4g}%")
    console.print(table)


def show_verification(report: VerificationReport):
    table = Table(title="Verification suites", show_header=True, header_style="bold magenta")
    table.add_column("Suite", style="cyan")
    table.add_column("Passed", justify="right")
    table.add_column("Max diff", justify="right")
    for name, passed, total, max_diff in report.suites():
        style = "green" if passed == total else "red"
        diff = "-" if np.isnan(max_diff) else f"{max_diff:.3e}"
        table.add_row(name, f"[{style}]{passed}/{total}[/{style}]", diff)
    console.print(table)
    console.print(report.equivalence_line, style="bold")
    for failure in report.failures:
        console.print(f"  [{failure.suite}] {failure.check}: {failure.detail or 'failed'}", style="red")


def show_summary(lines: List[str], title: str = MESSAGES["summary_title"], ok: bool = True):
    console.print(Panel(
        "\n".join(lines),
        title=title,
        border_style="green" if ok else "red",
        padding=(1, 2),
    ))
