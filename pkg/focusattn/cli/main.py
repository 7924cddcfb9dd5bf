# focusattn/cli/main.py

from typing import Optional

import typer
from rich.console import Console

from .commands import bench_command, compare_command, flops_command, run_command, verify_command

# Create main application
app = typer.Typer(
    name="pfa",
    help="[bold]Progressive focused attention[/bold] kernels, cascade runs and [green]cost model[/green]",
    add_completion=False,
    rich_markup_mode="rich",
    context_settings={"help_option_names": ["-h", "--help"]}
)

console = Console()

app.command(
    "verify",
    help="[bold green]Verify[/bold green] sparse kernels and cascades against the dense oracle",
    epilog="""
\033[1;33mEXAMPLES:\033[0m

  \033[2m# 1. Full verification with the default desk preset\033[0m
  \033[32mpfa verify\033[0m \033[34m--out results\033[0m

  \033[2m# 2. Degenerate schedule: PFA must collapse to dense attention\033[0m
  \033[32mpfa verify\033[0m \033[31m--window 8 --k-list 64,64,64,64,64\033[0m

  \033[2m# 3. Check that the checker fails on a 1e-6 fault\033[0m
  \033[32mpfa verify\033[0m \033[31m--inject-fault\033[0m

\033[1;35mEXIT CODES:\033[0m
  0 all checks passed, 1 a check failed, 2 configuration error
"""
)(verify_command)

app.command(
    "bench",
    help="[bold blue]Benchmark[/bold blue] masked score/aggregate kernels against dense matmul",
    epilog="""
\033[1;33mEXAMPLES:\033[0m

  \033[2m# Full grid (N 256/1024, d 32/64, densities 1 .. 1/64)\033[0m
  \033[32mpfa bench\033[0m \033[34m--out results\033[0m

  \033[2m# Quick single-size run in float32\033[0m
  \033[32mpfa bench\033[0m \033[31m--sizes 256 --dims 32 --iterations 5 --float32\033[0m
"""
)(bench_command)

app.command(
    "run",
    help="[bold green]Run[/bold green] a cascade and export per-layer statistics",
    epilog="""
\033[1;33mEXAMPLES:\033[0m

  \033[2m# PFA on a synthetic 64x64 map\033[0m
  \033[32mpfa run\033[0m \033[31m--preset desk --variant pfa\033[0m \033[34m--out run1\033[0m

  \033[2m# Export query row 40 of window 0, head 1 as one PGM per layer\033[0m
  \033[32mpfa run\033[0m \033[31m--heatmap 0,1,40\033[0m \033[34m--out heat\033[0m

  \033[2m# Replay a saved tensor with a config file and 4 threads\033[0m
  \033[32mpfa run\033[0m \033[36m--config run.cfg --input features.pft\033[0m \033[31m--threads 4\033[0m
"""
)(run_command)

app.command(
    "flops",
    help="[bold magenta]Cost model[/bold magenta]: Omega(SA), Omega(PFA) and per-layer breakdown",
    epilog="""
\033[1;33mEXAMPLES:\033[0m

  \033[2m# PFT schedule at the default 640x1280 output resolution\033[0m
  \033[32mpfa flops\033[0m \033[31m--preset pft\033[0m

  \033[2m# Geometric focus, alpha = 1/2 over 5 layers\033[0m
  \033[32mpfa flops\033[0m \033[31m--preset custom --blocks 5 --heads 1 --channels 8 --window 32 --alpha 0.5\033[0m
"""
)(flops_command)

app.command(
    "compare",
    help="[bold blue]Compare[/bold blue] vanilla, top-k, progressive and PFA on one input"
)(compare_command)


def version_callback(value: bool):
    """[bold cyan]Show version information[/bold cyan]"""
    if value:
        try:
            import importlib.metadata
            version = importlib.metadata.version("focusattn")
        except importlib.metadata.PackageNotFoundError:
            version = "0.1.0"

        console.print(f"[bold cyan]focusattn[/bold cyan] version [green]{version}[/green]")
        raise typer.Exit()


@app.callback()
def main(
    version: Optional[bool] = typer.Option(
        None,
        "--version", "-V",
        callback=version_callback,
        is_eager=True,
        help="[bold cyan]Show version information[/bold cyan]"
    )
):
    """
    [bold cyan]pfa[/bold cyan] - progressive focused attention toolkit

    Sparse window attention whose maps are inherited layer to layer and
    focused to the top-K entries per row, with a dense oracle, MAC counters
    and the closed-form cost model.

    [bold yellow]Examples:[/bold yellow]

        [green]pfa verify[/green]
        [green]pfa run[/green] [blue]--variant pfa --heatmap 0,0,0[/blue]
        [green]pfa flops[/green] [blue]--preset pft[/blue]
    """
    pass


# Entry point for pyproject.toml
def cli_main():
    try:
        app()
    except KeyboardInterrupt:
        console.print("Operation cancelled by user", style="yellow")
        raise typer.Exit(1)


if __name__ == "__main__":
    cli_main()
