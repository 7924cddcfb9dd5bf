# focusattn/cli/commands.py

from contextlib import contextmanager
from pathlib import Path
from typing import Annotated, List, Optional

import numpy as np
import pandas as pd
import typer
from rich.console import Console

from focusattn.core.cascade import Variant, run_cascade
from focusattn.core.debug_logger import debug_log, enable_debug_logging
from focusattn.core.errors import FocusAttentionError
from focusattn.core.metrics import (
    CostMode,
    CostModelInput,
    attention_reduction_ratio,
    attention_stats,
    layer_costs,
    omega_pfa,
    omega_sa,
    reduction_ratio,
    stats_frame,
)
from focusattn.core.presets import ALPHA_WARNING_THRESHOLD, k_schedule
from focusattn.core.tensor_io import read_tensor, save_history, synthetic_input, write_pgm, write_tensor
from focusattn.core.verification import PROBE_PRESET, VerifyOptions, run_verification
from focusattn.generators.base import ReportGenerator
from .bench import KernelBenchmark, target_ratio
from .config import (
    BENCH_DIMS,
    BENCH_ITERATIONS,
    BENCH_MAX_RATIO,
    BENCH_SIZES,
    BENCH_WARMUP,
    EXIT_CONFIG_ERROR,
    EXIT_OK,
    EXIT_VERIFY_FAILED,
    FLOPS_DEFAULT_HW,
    MESSAGES,
    OUTPUT_FILES,
    RunConfig,
    parse_int_list,
    resolve_config,
    save_config,
)
from .utils import (
    save_frame,
    show_costs,
    show_layer_stats,
    show_preset,
    show_summary,
    show_verification,
)

console = Console()

# Shared options
ConfigFile = Annotated[Optional[Path], typer.Option("--config",
                       help=r"[bold cyan]\[INPUT][/bold cyan] key=value config file; flags override its keys")]
PresetOpt = Annotated[Optional[str], typer.Option("--preset", "-p",
                      help=r"[bold green]\[MODEL][/bold green] pft, pft_light, desk or custom [dim]default: desk[/dim]")]
VariantOpt = Annotated[Optional[str], typer.Option("--variant",
                       help=r"[bold green]\[MODEL][/bold green] vanilla, topk, progressive or pfa [dim]default: pfa[/dim]")]
WindowOpt = Annotated[Optional[int], typer.Option("--window", "-w",
                      help=r"[bold green]\[MODEL][/bold green] Window size W (N = W*W tokens)")]
AlphaOpt = Annotated[Optional[str], typer.Option("--alpha",
                     help=r"[bold green]\[MODEL][/bold green] Geometric focus ratio in (0, 1), e.g. 0.5 or 1/2")]
KListOpt = Annotated[Optional[str], typer.Option("--k-list",
                     help=r"[bold green]\[MODEL][/bold green] Retained entries per block, e.g. 256,64,32,16,8")]
BlocksOpt = Annotated[Optional[str], typer.Option("--blocks",
                      help=r"[bold green]\[MODEL][/bold green] Layers per block, e.g. 2,4,6,6,6")]
HeadsOpt = Annotated[Optional[int], typer.Option("--heads", help=r"[bold green]\[MODEL][/bold green] Attention heads")]
ChannelsOpt = Annotated[Optional[int], typer.Option("--channels", help=r"[bold green]\[MODEL][/bold green] Channels C")]
SeedOpt = Annotated[Optional[int], typer.Option("--seed", "-s",
                    help=r"[bold blue]\[PARAMS][/bold blue] Seed for weights and synthetic input [dim]default: 0[/dim]")]
ThreadsOpt = Annotated[Optional[int], typer.Option("--threads", "-t",
                       help=r"[bold blue]\[PARAMS][/bold blue] Worker threads over windows [dim]default: $PFA_THREADS or 1[/dim]")]
RenormOpt = Annotated[Optional[bool], typer.Option("--renorm-topk/--no-renorm-topk",
                      help=r"[bold blue]\[PARAMS][/bold blue] Rescale rows trimmed by top-k to unit sum")]
HeightOpt = Annotated[Optional[int], typer.Option("--height", help=r"[bold blue]\[PARAMS][/bold blue] Feature map height")]
WidthOpt = Annotated[Optional[int], typer.Option("--width", help=r"[bold blue]\[PARAMS][/bold blue] Feature map width")]
OutOpt = Annotated[Optional[str], typer.Option("--out", "-o",
                   help=r"[bold blue]\[OUTPUT][/bold blue] Output directory [dim]default: pfa_out[/dim]")]
DebugOpt = Annotated[bool, typer.Option("--debug",
                     help=r"[bold yellow]\[BEHAVIOR][/bold yellow] Write a debug log under $PFA_LOG_DIR")]
QuietOpt = Annotated[bool, typer.Option("--quiet", "-q",
                     help=r"[bold yellow]\[BEHAVIOR][/bold yellow] Suppress non-essential output")]


def _int_list(text: Optional[str]) -> Optional[List[int]]:
    return None if text is None else parse_int_list(text)


@contextmanager
def config_errors():
    """Turn invalid configuration into exit code 2."""
    try:
        yield
    except FocusAttentionError as e:
        console.print(MESSAGES["config_error"].format(error=e), style="red")
        debug_log(f"Configuration error: {e}", "CLI", "ERROR")
        raise typer.Exit(EXIT_CONFIG_ERROR)


def _start(debug: bool, command: str, config: RunConfig):
    if debug:
        enable_debug_logging()
    debug_log(f"pfa {command}: {config}", "CLI", "INFO")


def _warn_alpha(preset, quiet: bool):
    if preset.alpha is not None and preset.alpha < ALPHA_WARNING_THRESHOLD and not quiet:
        console.print(MESSAGES["alpha_warning"].format(alpha=preset.alpha), style="yellow")


def verify_command(
    config_file: ConfigFile = None,
    preset: PresetOpt = None,
    window: WindowOpt = None,
    k_list: KListOpt = None,
    alpha: AlphaOpt = None,
    blocks: BlocksOpt = None,
    heads: HeadsOpt = None,
    channels: ChannelsOpt = None,
    seed: SeedOpt = None,
    threads: ThreadsOpt = None,
    out: OutOpt = None,
    seeds: Annotated[int, typer.Option("--seeds",
                     help=r"[bold blue]\[PARAMS][/bold blue] Random seeds for the oracle chain suite [dim]default: 100[/dim]")] = 100,
    property_cases: Annotated[int, typer.Option("--property-cases",
                              help=r"[bold blue]\[PARAMS][/bold blue] Generated structural cases [dim]default: 1000[/dim]")] = 1000,
    inject_fault: Annotated[bool, typer.Option("--inject-fault",
                            help=r"[bold red]\[SELF-TEST][/bold red] Perturb one sparse weight by 1e-6; verify must fail")] = False,
    debug: DebugOpt = False,
    quiet: QuietOpt = False,
):
    """
    [bold]Run the oracle-equivalence, invariant and cost-model suites.[/bold]

    Presets with windows up to 16x16 are checked directly; larger ones are
    replaced by a small probe preset for the cascade suites.
    Exit code 1 on any failed check.
    """
    with config_errors():
        config = resolve_config(config_file, preset=preset, window=window, k_list=_int_list(k_list),
                                alpha=alpha, blocks=_int_list(blocks), heads=heads, channels=channels,
                                seed=seed, threads=threads, out=out)
        _start(debug, "verify", config)
        model, _ = config.build()
        _warn_alpha(model, quiet)
        out_dir = config.out_dir()

    probe = model if model.window_size <= 16 else PROBE_PRESET
    options = VerifyOptions(seeds=seeds, property_cases=property_cases, threads=max(2, config.threads),
                            seed=config.seed, inject_fault=inject_fault, probe=probe)

    with console.status("Running verification suites...") as status:
        report = run_verification(options, progress=lambda name: status.update(f"Running {name}..."))

    if not quiet:
        show_verification(report)
    save_frame(report.to_frame(), out_dir / OUTPUT_FILES["verify_csv"], quiet)

    generator = ReportGenerator("verify")
    generator.load_context(suites=report.suites(), failures=report.failures, total_checks=len(report.checks),
                           equivalence_line=report.equivalence_line, elapsed_s=report.elapsed_s,
                           probe_name=probe.name, window_size=probe.window_size, channels=probe.channels,
                           heads=probe.heads)
    generator.export_report(out_dir / OUTPUT_FILES["verify_report"])

    if report.passed:
        console.print(MESSAGES["verify_passed"].format(count=len(report.checks)), style="green bold")
        raise typer.Exit(EXIT_OK)
    console.print(MESSAGES["verify_failed"].format(count=len(report.failures)), style="red bold")
    raise typer.Exit(EXIT_VERIFY_FAILED)


def bench_command(
    config_file: ConfigFile = None,
    seed: SeedOpt = None,
    out: OutOpt = None,
    sizes: Annotated[Optional[str], typer.Option("--sizes",
                     help=r"[bold blue]\[PARAMS][/bold blue] Token counts N [dim]default: 256,1024[/dim]")] = None,
    dims: Annotated[Optional[str], typer.Option("--dims",
                    help=r"[bold blue]\[PARAMS][/bold blue] Head dims d [dim]default: 32,64[/dim]")] = None,
    warmup: Annotated[int, typer.Option("--warmup", min=0,
                      help=r"[bold blue]\[PARAMS][/bold blue] Warmup iterations")] = BENCH_WARMUP,
    iterations: Annotated[int, typer.Option("--iterations", min=1,
                          help=r"[bold blue]\[PARAMS][/bold blue] Measured iterations")] = BENCH_ITERATIONS,
    float32: Annotated[bool, typer.Option("--float32",
                       help=r"[bold blue]\[PARAMS][/bold blue] Benchmark the raw kernels in 32-bit floats")] = False,
    debug: DebugOpt = False,
    quiet: QuietOpt = False,
):
    """
    [bold]Time the masked score and aggregate kernels against dense matmul.[/bold]

    Reports median wall time, measured MACs and ns per MAC for every
    (N, d, density) point, plus the sparse/dense ratio at N=1024, d=64,
    density 1/16.
    """
    with config_errors():
        config = resolve_config(config_file, seed=seed, out=out)
        _start(debug, "bench", config)
        out_dir = config.out_dir()
        bench = KernelBenchmark(sizes=_int_list(sizes) or BENCH_SIZES, dims=_int_list(dims) or BENCH_DIMS,
                                warmup=warmup, iterations=iterations, seed=config.seed, float32=float32)

    frame = bench.run(show_progress=not quiet)
    save_frame(frame, out_dir / OUTPUT_FILES["bench"], quiet)
    if not quiet:
        console.print(frame.to_string(index=False))

    ratio = target_ratio(frame)
    if ratio is None:
        console.print("Acceptance point N=1024, d=64, density 1/16 was not measured", style="dim")
    elif ratio > BENCH_MAX_RATIO:
        console.print(MESSAGES["bench_flagged"].format(ratio=ratio, limit=BENCH_MAX_RATIO), style="yellow bold")
    else:
        console.print(MESSAGES["bench_ok"].format(ratio=ratio, limit=BENCH_MAX_RATIO), style="green bold")
    raise typer.Exit(EXIT_OK)


def run_command(
    config_file: ConfigFile = None,
    preset: PresetOpt = None,
    variant: VariantOpt = None,
    window: WindowOpt = None,
    k_list: KListOpt = None,
    alpha: AlphaOpt = None,
    blocks: BlocksOpt = None,
    heads: HeadsOpt = None,
    channels: ChannelsOpt = None,
    seed: SeedOpt = None,
    threads: ThreadsOpt = None,
    renorm_topk: RenormOpt = None,
    height: HeightOpt = None,
    width: WidthOpt = None,
    out: OutOpt = None,
    input_file: Annotated[Optional[str], typer.Option("--input", "-i",
                          help=r"[bold cyan]\[INPUT][/bold cyan] Raw PFT1 tensor instead of synthetic input")] = None,
    topk_k: Annotated[Optional[int], typer.Option("--topk-k",
                      help=r"[bold blue]\[PARAMS][/bold blue] k for the topk variant [dim]default: N/2[/dim]")] = None,
    heatmap: Annotated[Optional[str], typer.Option("--heatmap",
                       help=r"[bold blue]\[OUTPUT][/bold blue] 'window,head,row': export that query row per layer as PGM")] = None,
    save_input: Annotated[bool, typer.Option("--save-input",
                          help=r"[bold blue]\[OUTPUT][/bold blue] Also write the input map as a PFT1 tensor")] = False,
    debug: DebugOpt = False,
    quiet: QuietOpt = False,
):
    """
    [bold]Run the cascade end to end and export per-layer statistics.[/bold]

    Writes stats.csv, history.json, run.cfg and a text summary; with
    [blue]--heatmap[/blue] also one 16-bit PGM per layer.
    """
    with config_errors():
        config = resolve_config(config_file, preset=preset, variant=variant, window=window,
                                k_list=_int_list(k_list), alpha=alpha, blocks=_int_list(blocks), heads=heads,
                                channels=channels, seed=seed, threads=threads, renorm_topk=renorm_topk,
                                height=height, width=width, out=out, input=input_file, topk_k=topk_k,
                                heatmap=heatmap)
        _start(debug, "run", config)
        model, weights = config.build()
        _warn_alpha(model, quiet)
        out_dir = config.out_dir()
        if config.input:
            fmap = read_tensor(config.input)
            input_desc = f"{config.input} ({fmap.h}x{fmap.w}x{fmap.c})"
        else:
            h, w = config.geometry()
            fmap = synthetic_input(h, w, model.channels, config.seed)
            input_desc = f"synthetic {h}x{w}x{model.channels}, seed {config.seed}"
        _, trace = run_cascade(model, weights, fmap, config.variant, config.renorm_topk, config.threads,
                               config.topk_k, config.heatmap_selection())

    if not quiet:
        show_preset(model, trace.k_schedule)
    outputs = [
        save_frame(stats_frame(trace), out_dir / OUTPUT_FILES["stats"], quiet),
        save_history(trace.history, out_dir / OUTPUT_FILES["history"]),
        save_config(config, out_dir / OUTPUT_FILES["config"]),
    ]
    if save_input:
        outputs.append(write_tensor(out_dir / OUTPUT_FILES["input"], fmap))
    if config.heatmap is not None:
        window_size = model.window_size
        for layer in trace.layers:
            grid = layer.captured_row.reshape(window_size, window_size)
            outputs.append(write_pgm(out_dir / OUTPUT_FILES["heatmap"].format(layer=layer.layer), grid))

    stats = attention_stats(trace)
    ks = [layer.k for layer in trace.layers]
    if not quiet:
        show_layer_stats(stats, ks, title=f"{config.variant.value} on {input_desc}")

    score = sum(t.score_macs_total for t in trace.layers)
    aggregate = sum(t.aggregate_macs_total for t in trace.layers)
    projection = sum(t.projection_macs for t in trace.layers)
    generator = ReportGenerator("run")
    generator.load_context(preset_name=model.name, variant=config.variant.value, seed=config.seed,
                           threads=config.threads, input_desc=input_desc, padded_hw=trace.padded_hw,
                           num_windows=trace.num_windows, renormalize=config.renorm_topk, stats=stats, ks=ks,
                           score_macs=score, aggregate_macs=aggregate, projection_macs=projection,
                           outputs=[str(p) for p in outputs])
    outputs.append(generator.export_report(out_dir / OUTPUT_FILES["run_report"]))

    if not quiet:
        show_summary([
            f"[bold green]Layers:[/bold green] {trace.total_layers} ({model.name}, {config.variant.value})",
            f"[bold blue]Score MACs:[/bold blue] {score:,}   [bold blue]Aggregate MACs:[/bold blue] {aggregate:,}",
            f"[bold yellow]Outputs:[/bold yellow] {len(outputs)} files in {out_dir}",
        ])
    raise typer.Exit(EXIT_OK)


def flops_command(
    config_file: ConfigFile = None,
    preset: PresetOpt = None,
    window: WindowOpt = None,
    k_list: KListOpt = None,
    alpha: AlphaOpt = None,
    blocks: BlocksOpt = None,
    heads: HeadsOpt = None,
    channels: ChannelsOpt = None,
    height: HeightOpt = None,
    width: WidthOpt = None,
    out: OutOpt = None,
    debug: DebugOpt = False,
    quiet: QuietOpt = False,
):
    """
    [bold]Evaluate the closed-form attention cost of a preset.[/bold]

    Prints Omega(SA), Omega(PFA), the per-layer breakdown and the exact
    reduction ratios in MAC and FLOP conventions. Default geometry 640x1280.
    """
    with config_errors():
        config = resolve_config(config_file, preset=preset, window=window, k_list=_int_list(k_list),
                                alpha=alpha, blocks=_int_list(blocks), heads=heads, channels=channels,
                                height=height, width=width, out=out)
        _start(debug, "flops", config)
        model, _ = config.build()
        _warn_alpha(model, quiet)
        out_dir = config.out_dir()
        h, w = config.geometry(FLOPS_DEFAULT_HW)
        cost = CostModelInput.from_preset(model, h, w)

    costs = layer_costs(cost)
    sa = omega_sa(cost.with_mode(CostMode.SA))
    pfa = omega_pfa(cost)
    ratio = reduction_ratio(cost)
    attention_ratio = attention_reduction_ratio(cost)

    if not quiet:
        show_preset(model, k_schedule(model))
        show_costs(costs)
        show_summary([
            f"[bold]Omega(SA)[/bold]  = {sa:,} MACs ({2 * sa:,} FLOPs)",
            f"[bold]Omega(PFA)[/bold] = {pfa:,} MACs ({2 * pfa:,} FLOPs)",
            f"[bold green]Reduction ratio[/bold green] = {ratio} ({float(ratio):.6f})",
            f"[bold green]Attention-term ratio[/bold green] = {attention_ratio} ({float(attention_ratio):.6f})",
        ], title=f"Cost model at {h}x{w}")

    frame = pd.DataFrame(
        [(c.layer, c.k, c.projection_macs, c.attention_term, c.score_macs, c.total, c.flops) for c in costs],
        columns=["layer", "k", "projection_macs", "attention_term", "score_macs", "total_macs", "flops"],
    )
    save_frame(frame, out_dir / OUTPUT_FILES["flops_csv"], quiet)

    generator = ReportGenerator("flops")
    focus = f"geometric alpha = {model.alpha}" if model.alpha is not None else "per-block schedule"
    generator.load_context(preset_name=model.name, h=h, w=w, channels=model.channels,
                           window_size=model.window_size, layers=model.total_layers, focus=focus,
                           block_ks=model.k_list, costs=costs, omega_sa=sa, omega_pfa=pfa, ratio=ratio,
                           attention_ratio=attention_ratio)
    generator.export_report(out_dir / OUTPUT_FILES["flops_report"])
    raise typer.Exit(EXIT_OK)


def compare_command(
    config_file: ConfigFile = None,
    preset: PresetOpt = None,
    window: WindowOpt = None,
    k_list: KListOpt = None,
    alpha: AlphaOpt = None,
    blocks: BlocksOpt = None,
    heads: HeadsOpt = None,
    channels: ChannelsOpt = None,
    seed: SeedOpt = None,
    threads: ThreadsOpt = None,
    renorm_topk: RenormOpt = None,
    height: HeightOpt = None,
    width: WidthOpt = None,
    out: OutOpt = None,
    debug: DebugOpt = False,
    quiet: QuietOpt = False,
):
    """
    [bold]Run all four attention variants on the same input side by side.[/bold]
    """
    with config_errors():
        config = resolve_config(config_file, preset=preset, window=window, k_list=_int_list(k_list),
                                alpha=alpha, blocks=_int_list(blocks), heads=heads, channels=channels,
                                seed=seed, threads=threads, renorm_topk=renorm_topk, height=height,
                                width=width, out=out)
        _start(debug, "compare", config)
        model, weights = config.build()
        _warn_alpha(model, quiet)
        out_dir = config.out_dir()
        h, w = config.geometry()
        fmap = synthetic_input(h, w, model.channels, config.seed)

        records, baseline = [], None
        for variant in Variant:
            output, trace = run_cascade(model, weights, fmap, variant, config.renorm_topk, config.threads)
            if baseline is None:
                baseline = output.values
            stats = attention_stats(trace)
            records.append({
                "variant": variant.value,
                "score_macs": sum(t.score_macs_total for t in trace.layers),
                "aggregate_macs": sum(t.aggregate_macs_total for t in trace.layers),
                "projection_macs": sum(t.projection_macs for t in trace.layers),
                "mean_support": float(np.mean([s.mean_support for s in stats])),
                "mean_entropy": float(np.mean([s.mean_entropy for s in stats])),
                "max_abs_output_delta_vs_vanilla": float(np.max(np.abs(output.values - baseline))),
            })

    frame = pd.DataFrame.from_records(records)
    if not quiet:
        console.print(frame.to_string(index=False))
    save_frame(frame, out_dir / OUTPUT_FILES["compare"], quiet)
    raise typer.Exit(EXIT_OK)
