# focusattn/cli/bench.py

import time
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, List, Optional, Sequence

import numpy as np
import pandas as pd
from rich.console import Console
from rich.progress import BarColumn, Progress, SpinnerColumn, TextColumn

from focusattn.core.debug_logger import debug_log
from focusattn.core.sparse_ops import aggregate_kernel, scores_kernel
from .config import (
    BENCH_DENSITIES,
    BENCH_DIMS,
    BENCH_ITERATIONS,
    BENCH_SIZES,
    BENCH_TARGET,
    BENCH_WARMUP,
)

console = Console()

BENCH_COLUMNS = ["variant", "N", "d", "density", "median_ns", "macs", "ns_per_mac"]


@dataclass(frozen=True)
class BenchCase:
    n: int
    d: int
    density: Fraction

    @property
    def row_width(self) -> int:
        return max(1, int(self.n * self.density))


def random_row_mask(n: int, width: int, rng: np.random.Generator):
    """CSR (indptr, indices) with `width` sorted random columns per row."""
    indices = np.sort(rng.random((n, n)).argsort(axis=1)[:, :width], axis=1).reshape(-1)
    indptr = np.arange(n + 1, dtype=np.int64) * width
    return indptr, indices.astype(np.int64)


def time_call(fn: Callable[[], object], warmup: int, iterations: int) -> int:
    """Median wall time of fn in nanoseconds."""
    for _ in range(warmup):
        fn()
    samples = []
    for _ in range(iterations):
        start = time.perf_counter_ns()
        fn()
        samples.append(time.perf_counter_ns() - start)
    return int(np.median(samples))


class KernelBenchmark:
    """Times the sparse score/aggregate kernels against dense matmul baselines."""

    def __init__(self, sizes: Sequence[int] = BENCH_SIZES, dims: Sequence[int] = BENCH_DIMS,
                 densities: Sequence[Fraction] = BENCH_DENSITIES, warmup: int = BENCH_WARMUP,
                 iterations: int = BENCH_ITERATIONS, seed: int = 0, float32: bool = False):
        self.cases = [BenchCase(n, d, Fraction(p)) for n in sizes for d in dims for p in densities]
        self.warmup = warmup
        self.iterations = iterations
        self.seed = seed
        self.dtype = np.float32 if float32 else np.float64
        self.rows: List[dict] = []

    def _record(self, variant: str, case: BenchCase, median_ns: int, macs: int) -> None:
        self.rows.append({
            "variant": variant,
            "N": case.n,
            "d": case.d,
            "density": str(case.density),
            "median_ns": median_ns,
            "macs": macs,
            "ns_per_mac": median_ns / macs,
        })

    def run_case(self, case: BenchCase) -> None:
        rng = np.random.default_rng([self.seed, case.n, case.d, case.density.denominator])
        q, k, v = (rng.standard_normal((case.n, case.d)).astype(self.dtype) for _ in range(3))
        indptr, indices = random_row_mask(case.n, case.row_width, rng)
        weights = rng.random(indices.size).astype(self.dtype)
        dense_a = np.zeros((case.n, case.n), dtype=self.dtype)
        dense_a[np.repeat(np.arange(case.n), case.row_width), indices] = weights
        dense_macs = case.n * case.n * case.d

        _, score_macs = scores_kernel(q, k, indptr, indices)
        _, aggregate_macs = aggregate_kernel(weights, v, indptr, indices)

        timings = [
            ("smm_scores", lambda: scores_kernel(q, k, indptr, indices), score_macs),
            ("dense_scores", lambda: np.matmul(q, k.T), dense_macs),
            ("smm_aggregate", lambda: aggregate_kernel(weights, v, indptr, indices), aggregate_macs),
            ("dense_aggregate", lambda: np.matmul(dense_a, v), dense_macs),
        ]
        for variant, fn, macs in timings:
            self._record(variant, case, time_call(fn, self.warmup, self.iterations), macs)
        debug_log(f"Bench N={case.n} d={case.d} density={case.density} done", "BENCH")

    def run(self, show_progress: bool = True) -> pd.DataFrame:
        self.rows = []
        with Progress(
            SpinnerColumn(),
            TextColumn("[progress.description]{task.description}"),
            BarColumn(),
            console=console,
            transient=True,
            disable=not show_progress,
        ) as progress:
            task = progress.add_task("Benchmarking kernels...", total=len(self.cases))
            for case in self.cases:
                progress.update(task, description=f"N={case.n} d={case.d} density={case.density}")
                self.run_case(case)
                progress.advance(task)
        return self.frame()

    def frame(self) -> pd.DataFrame:
        return pd.DataFrame.from_records(self.rows, columns=BENCH_COLUMNS)


def target_ratio(frame: pd.DataFrame, target=BENCH_TARGET) -> Optional[float]:
    """smm_scores median over dense_scores median at the acceptance point, if it was measured."""
    n, d, density = target
    at = frame[(frame["N"] == n) & (frame["d"] == d) & (frame["density"] == str(density))]
    sparse = at.loc[at["variant"] == "smm_scores", "median_ns"]
    dense = at.loc[at["variant"] == "dense_scores", "median_ns"]
    if sparse.empty or dense.empty:
        return None
    return float(sparse.iloc[0]) / float(dense.iloc[0])
