# focusattn/core/verification.py

"""
Self-check suites run by `pfa verify`.

Each suite returns CheckResult rows; a failing row carries the coordinate
(seed / step / layer / window / head / row / col) of the first violation.
"""

import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from focusattn.core.attention import AttentionInputs, pfa_step
from focusattn.core.cascade import Variant, run_cascade
from focusattn.core.debug_logger import debug_log
from focusattn.core.dense_ops import Distribution, seeded_fill
from focusattn.core.metrics import (
    CostMode,
    CostModelInput,
    nonincreasing_within_parity,
    omega_pfa,
    omega_sa,
    reconcile,
    stats_frame,
)
from focusattn.core.oracle import oracle_cascade, oracle_pfa_chain
from focusattn.core.presets import (
    NAMED_PRESETS,
    LayerWeights,
    ModelPreset,
    build_weights,
    custom_preset,
    k_for_layer,
    with_full_schedule,
)
from focusattn.core.sparse_ops import hadamard_rownorm
from focusattn.core.structures import DenseMatrix, RowSparseMatrix
from focusattn.core.tensor_io import synthetic_input
from focusattn.core.windows import FeatureMap, merge, partition

ORACLE_TOLERANCE = 1e-10
CASCADE_TOLERANCE = 1e-9
ROW_SUM_TOLERANCE = 1e-9
FAULT_SIZE = 1e-6

# small enough to replay densely, padded on one axis, three blocks of shrinking K
PROBE_PRESET = custom_preset(blocks=[2, 2, 2], k_list=[64, 16, 4], heads=2, channels=16,
                             window_size=8, name="probe")

QUOTED_PRESETS = {
    "pft": dict(layer_counts=[4, 4, 4, 6, 6, 6], heads=6, channels=240, window_size=32,
                k_list=[1024, 256, 128, 64, 32, 16]),
    "pft_light": dict(layer_counts=[2, 4, 6, 6, 6], heads=4, channels=52, window_size=32,
                      k_list=[1024, 256, 128, 64, 32]),
}


@dataclass
class CheckResult:
    suite: str
    check: str
    passed: bool
    max_diff: float = float("nan")
    detail: str = ""


@dataclass
class VerifyOptions:
    seeds: int = 100
    property_cases: int = 1000
    threads: int = 4
    seed: int = 0
    inject_fault: bool = False
    probe: ModelPreset = PROBE_PRESET


@dataclass
class VerificationReport:
    checks: List[CheckResult] = field(default_factory=list)
    equivalence_line: str = ""
    elapsed_s: float = 0.0

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failures(self) -> List[CheckResult]:
        return [c for c in self.checks if not c.passed]

    def suites(self) -> List[Tuple[str, int, int, float]]:
        """(suite, passed, total, max diff) in first-seen order."""
        summary = {}
        for c in self.checks:
            passed, total, diff = summary.get(c.suite, (0, 0, float("nan")))
            if not np.isnan(c.max_diff):
                diff = c.max_diff if np.isnan(diff) else max(diff, c.max_diff)
            summary[c.suite] = (passed + c.passed, total + 1, diff)
        return [(name, *values) for name, values in summary.items()]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [(c.suite, c.check, c.passed, c.max_diff, c.detail) for c in self.checks],
            columns=["suite", "check", "passed", "max_diff", "detail"],
        )


def probe_geometry(preset: ModelPreset) -> Tuple[int, int]:
    """Two windows down, two and a half across, so the right edge is padded."""
    ws = preset.window_size
    return 2 * ws, 2 * ws + ws // 2


def _argmax_coordinate(diff: np.ndarray) -> Tuple[int, ...]:
    return tuple(int(i) for i in np.unravel_index(int(np.argmax(diff)), diff.shape))


def _chain_inputs(seed: int, n: int, d: int, length: int):
    base = (seed * 1_000_003 + n * 101 + d) * 8
    steps = []
    for s in range(length):
        q, k, v = (seeded_fill(n, d, (base + s) * 3 + j, Distribution.GAUSSIAN).values for j in range(3))
        steps.append((q, k, v))
    return steps


def _perturbed(a: RowSparseMatrix, row: int) -> Tuple[RowSparseMatrix, int]:
    data = a.data.copy()
    j = int(a.indptr[row])
    data[j] += FAULT_SIZE
    return RowSparseMatrix(a.shape, a.indptr, a.indices, data), int(a.indices[j])


def suite_oracle_chains(seeds: int, inject_fault: bool = False) -> List[CheckResult]:
    """Sparse PFA chains against the dense masked replay, full and halving schedules."""
    results = []
    fault_pending = inject_fault
    for n in (16, 64, 256):
        for d in (2, 8, 16):
            for schedule in ("full", "halving"):
                worst, failure = 0.0, ""
                for seed in range(seeds):
                    length = 1 + (seed + n + d) % 6
                    ks = [n] * length if schedule == "full" else [max(1, n >> s) for s in range(length)]
                    steps = _chain_inputs(seed, n, d, length)
                    expected = oracle_pfa_chain(steps, ks)
                    previous = RowSparseMatrix.ones(n)
                    mask = previous.mask()
                    for s, ((q, k, v), k_l, want) in enumerate(zip(steps, ks, expected)):
                        inputs = AttentionInputs(DenseMatrix(q), DenseMatrix(k), DenseMatrix(v))
                        got = pfa_step(inputs, previous, mask, k_l)
                        previous, mask = got.attention, got.mask
                        attention = got.attention
                        if fault_pending and s == length - 1 and schedule == "halving":
                            attention, col = _perturbed(attention, n // 3)
                            fault_pending = False
                            debug_log(f"Injected {FAULT_SIZE} fault at seed={seed} step={s + 1} "
                                      f"row={n // 3} col={col}", "VERIFY", "WARNING")
                        diff_a = np.abs(attention.to_dense() - want.attention)
                        diff_o = np.abs(got.output.values - want.output)
                        step_worst = max(float(diff_a.max()), float(diff_o.max()))
                        if not np.array_equal(got.mask.to_dense(), want.mask):
                            row, col = _argmax_coordinate(got.mask.to_dense() != want.mask)
                            failure = failure or f"mask differs at seed={seed} step={s + 1} row={row} col={col}"
                        if step_worst > ORACLE_TOLERANCE and not failure:
                            row, col = _argmax_coordinate(diff_a if diff_a.max() >= diff_o.max() else diff_o)
                            what = "attention" if diff_a.max() >= diff_o.max() else "output"
                            failure = f"{what} differs at seed={seed} step={s + 1} row={row} col={col}"
                        worst = max(worst, step_worst)
                results.append(CheckResult("oracle-chains", f"N={n} d={d} {schedule}", not failure,
                                           worst, failure))
    return results


def suite_degenerate(probe: ModelPreset, f: FeatureMap, seed: int) -> Tuple[List[CheckResult], str]:
    """K = N everywhere: one layer per parity is dense attention, deeper chains are progressive."""
    shallow = with_full_schedule(probe, layers=min(2, probe.total_layers))
    shallow_weights = build_weights(shallow, seed)
    dense, _ = run_cascade(shallow, shallow_weights, f, Variant.VANILLA)
    focused, _ = run_cascade(shallow, shallow_weights, f, Variant.PFA)
    diff = float(np.max(np.abs(dense.values - focused.values)))
    line = (f"pfa ≡ vanilla (K = N = {shallow.tokens_per_window}, one layer per parity): "
            f"max |diff| = {diff:.3e}")

    full = with_full_schedule(probe)
    weights = build_weights(full, seed)
    chained, _ = run_cascade(full, weights, f, Variant.PFA)
    progressive, _ = run_cascade(full, weights, f, Variant.PROGRESSIVE)
    renormed, _ = run_cascade(full, weights, f, Variant.PFA, renormalize_after_topk=True)
    chain_diff = float(np.max(np.abs(chained.values - progressive.values)))
    results = [
        CheckResult("degenerate", "pfa equals vanilla", diff <= ORACLE_TOLERANCE, diff,
                    "" if diff <= ORACLE_TOLERANCE else line),
        CheckResult("degenerate", f"pfa equals progressive over {full.total_layers} layers",
                    chain_diff <= ORACLE_TOLERANCE, chain_diff,
                    "" if chain_diff <= ORACLE_TOLERANCE else f"max |diff| = {chain_diff:.3e}"),
        CheckResult("degenerate", "renormalize flag is a no-op at K = N",
                    np.array_equal(chained.values, renormed.values), 0.0),
    ]
    return results, line


def _chain_invariant_failure(trace) -> str:
    for t in trace.layers:
        parent = trace.same_parity_parent(t.layer)
        if parent is None:
            continue
        grew = np.argwhere(t.max_support > parent.max_support)
        if grew.size:
            w, h = grew[0]
            return f"support grew at layer={t.layer} window={w} head={h}"
        short = np.argwhere(t.overlap < 1.0)
        if short.size:
            w, h = short[0]
            return f"support left its parent at layer={t.layer} window={w} head={h}"
    return ""


def suite_oracle_cascade(probe: ModelPreset, weights: LayerWeights, f: FeatureMap) -> List[CheckResult]:
    results = []
    for renorm in (False, True):
        out, trace = run_cascade(probe, weights, f, Variant.PFA, renormalize_after_topk=renorm)
        want = oracle_cascade(probe, weights, f.values, renormalize_after_topk=renorm)
        diff = np.abs(out.values - want)
        worst = float(diff.max())
        detail = ""
        if worst > CASCADE_TOLERANCE:
            y, x, ch = _argmax_coordinate(diff)
            detail = f"output differs at pixel=({y}, {x}) channel={ch}"
        label = "renormalized" if renorm else "plain"
        results.append(CheckResult("oracle-cascade", f"pfa cascade {label}", not detail, worst, detail))

        failure = _chain_invariant_failure(trace)
        supports = [float(t.mean_support.mean()) for t in trace.layers]
        parities = [t.parity for t in trace.layers]
        if not failure and not nonincreasing_within_parity(supports, parities):
            failure = "mean support grew within a parity chain"
        results.append(CheckResult("chain-invariants", f"support shrinks within parity ({label})",
                                   not failure, detail=failure))
    return results


def suite_schedule() -> List[CheckResult]:
    """Focus-ratio arithmetic and the closed-form cost examples."""
    geometric = custom_preset(blocks=[5], k_list=None, heads=1, channels=8, window_size=32,
                              alpha=Fraction(1, 2))
    ks = [k_for_layer(geometric, layer) for layer in range(1, 6)]
    ratio = Fraction(ks[4], ks[0])
    base = dict(h=64, w=64, channels=8, window_size=16)
    sa_1 = omega_sa(CostModelInput(layers=1, **base))
    sa_2 = omega_sa(CostModelInput(layers=2, **base))
    pfa_2 = omega_pfa(CostModelInput(layers=2, mode=CostMode.PFA_GEOMETRIC, alpha=Fraction(1, 2), **base))
    flat = omega_pfa(CostModelInput(layers=3, mode=CostMode.PFA_SCHEDULE, k_list=[256] * 3, **base))
    return [
        CheckResult("schedule", "geometric alpha=1/2 K list", ks == [1024, 512, 256, 128, 64],
                    detail=f"got {ks}"),
        CheckResult("schedule", "K5/K1 == 0.0625", ratio == Fraction(1, 16), detail=f"got {ratio}"),
        CheckResult("schedule", "omega_sa example", sa_1 == 17_825_792 and sa_2 == 2 * sa_1,
                    detail=f"got {sa_1}, {sa_2}"),
        CheckResult("schedule", "omega_pfa example", pfa_2 == 27_262_976, detail=f"got {pfa_2}"),
        CheckResult("schedule", "all-W^2 schedule equals SA",
                    flat == omega_sa(CostModelInput(layers=3, **base)), detail=f"got {flat}"),
    ]


def suite_reconciliation(probe: ModelPreset, weights: LayerWeights, f: FeatureMap) -> List[CheckResult]:
    h, w = f.h, f.w
    scheduled = CostModelInput.from_preset(probe, h, w, padded=True)
    dense = scheduled.with_mode(CostMode.SA)
    results = []
    measured = {}
    for variant, cost in ((Variant.VANILLA, dense), (Variant.TOPK, dense),
                          (Variant.PROGRESSIVE, dense), (Variant.PFA, scheduled)):
        _, trace = run_cascade(probe, weights, f, variant)
        report = reconcile(trace, cost)
        measured[variant] = report
        bad = report.mismatches()
        detail = ""
        if bad:
            r = bad[0]
            detail = (f"layer={r.layer} score {r.measured_score_macs} vs {r.analytic_score_macs}, "
                      f"aggregate {r.measured_aggregate_macs} vs {r.analytic_aggregate_macs}")
        results.append(CheckResult("reconciliation", f"{variant.value} counters", report.matches,
                                   detail=detail))

    vanilla = measured[Variant.VANILLA]
    exact = all(2 * r.measured_score_macs * probe.total_layers == vanilla.sa_attention_macs
                for r in vanilla.rows)
    results.append(CheckResult("reconciliation", "vanilla score MACs == SA attention term / 2", exact))

    full = with_full_schedule(probe)
    _, pfa_full = run_cascade(full, weights, f, Variant.PFA)
    _, vanilla_full = run_cascade(full, weights, f, Variant.VANILLA)
    same = [a.score_macs_total for a in pfa_full.layers] == [b.score_macs_total for b in vanilla_full.layers]
    results.append(CheckResult("reconciliation", "full-support pfa measures like vanilla", same))
    return results


def _random_row_sparse(rng: np.random.Generator, n: int) -> RowSparseMatrix:
    support = rng.random((n, n)) < rng.uniform(0.2, 1.0)
    support[np.arange(n), rng.integers(0, n, size=n)] = True
    return RowSparseMatrix.from_dense(np.where(support, rng.uniform(0.01, 1.0, size=(n, n)), 0.0))


def _check_norm_rows(rng, case) -> Optional[str]:
    m = _random_row_sparse(rng, int(rng.integers(2, 33)))
    sums = hadamard_rownorm(m, m).row_sums()
    bad = np.flatnonzero(np.abs(sums - 1.0) > ROW_SUM_TOLERANCE)
    return f"case={case} row={bad[0]} sum={sums[bad[0]]!r}" if bad.size else None


def _check_chain_shrinkage(rng, case) -> Optional[str]:
    n, d = int(rng.integers(4, 33)), int(rng.integers(1, 7))
    ks = sorted(rng.integers(1, n + 1, size=int(rng.integers(2, 5))).tolist(), reverse=True)
    previous = RowSparseMatrix.ones(n)
    mask = previous.mask()
    for step, k_l in enumerate(ks, start=1):
        q, k, v = (rng.normal(size=(n, d)) for _ in range(3))
        got = pfa_step(AttentionInputs(DenseMatrix(q), DenseMatrix(k), DenseMatrix(v)), previous, mask, k_l)
        outside = got.mask.to_dense() & ~mask.to_dense()
        if outside.any():
            row, col = _argmax_coordinate(outside)
            return f"case={case} step={step} row={row} col={col} left the parent support"
        want = np.minimum(k_l, mask.row_nnz())
        wrong = np.flatnonzero(got.attention.row_nnz() != want)
        if wrong.size:
            return f"case={case} step={step} row={wrong[0]} nnz != min(K, parent)"
        previous, mask = got.attention, got.mask
    return None


def _check_round_trip(rng, case) -> Optional[str]:
    ws = int(rng.integers(2, 7))
    h, w, c = int(rng.integers(ws, 3 * ws + 1)), int(rng.integers(ws, 3 * ws + 1)), int(rng.integers(1, 4))
    shift = [(0, 0), (ws // 2, ws // 2), (int(rng.integers(0, ws)), int(rng.integers(0, ws)))][case % 3]
    f = FeatureMap(rng.normal(size=(h, w, c)))
    back = merge(partition(f, ws, shift))
    if not np.array_equal(back.values, f.values):
        return f"case={case} h={h} w={w} W={ws} shift={shift} round trip is not exact"
    return None


def _check_sharpening(rng, case) -> Optional[str]:
    n, d = int(rng.integers(4, 17)), int(rng.integers(1, 5))
    q, k, v = (rng.normal(size=(n, d)) for _ in range(3))
    inputs = AttentionInputs(DenseMatrix(q), DenseMatrix(k), DenseMatrix(v))
    scores = q @ k.T / np.sqrt(d)
    base = np.exp(scores - scores.max(axis=1, keepdims=True))
    base /= base.sum(axis=1, keepdims=True)
    previous = RowSparseMatrix.ones(n)
    mask = previous.mask()
    for power in range(1, int(rng.integers(2, 5)) + 1):
        got = pfa_step(inputs, previous, mask, n)
        want = base ** power
        want /= want.sum(axis=1, keepdims=True)
        diff = np.abs(got.attention.to_dense() - want)
        if diff.max() > ROW_SUM_TOLERANCE:
            row, col = _argmax_coordinate(diff)
            return f"case={case} power={power} row={row} col={col} diff={diff.max():.3e}"
        previous, mask = got.attention, got.mask
    return None


def _check_topk_row_sums(rng, case) -> Optional[str]:
    n, d = int(rng.integers(2, 33)), int(rng.integers(1, 7))
    q, k, v = (rng.normal(size=(n, d)) for _ in range(3))
    inputs = AttentionInputs(DenseMatrix(q), DenseMatrix(k), DenseMatrix(v))
    k_l = int(rng.integers(1, n + 1))
    ones = RowSparseMatrix.ones(n)
    plain = pfa_step(inputs, ones, ones.mask(), k_l).attention.row_sums()
    renorm = pfa_step(inputs, ones, ones.mask(), k_l, renormalize_after_topk=True).attention.row_sums()
    if np.any(plain <= 0) or np.any(plain > 1 + ROW_SUM_TOLERANCE):
        return f"case={case} row={int(np.argmax(plain))} sum outside (0, 1]"
    bad = np.flatnonzero(np.abs(renorm - 1.0) > ROW_SUM_TOLERANCE)
    return f"case={case} row={bad[0]} renormalized sum {renorm[bad[0]]!r}" if bad.size else None


STRUCTURAL_CHECKS: Sequence[Tuple[str, Callable]] = (
    ("Norm rows sum to 1", _check_norm_rows),
    ("support shrinks and nnz == min(K, parent)", _check_chain_shrinkage),
    ("partition/merge round trip", _check_round_trip),
    ("constant-score chains follow the power law", _check_sharpening),
    ("top-k row sums", _check_topk_row_sums),
)


def suite_structural(cases: int, seed: int) -> List[CheckResult]:
    rng = np.random.default_rng(seed)
    per_check = max(1, -(-cases // len(STRUCTURAL_CHECKS)))
    results = []
    for name, check in STRUCTURAL_CHECKS:
        failure = None
        for case in range(per_check):
            failure = check(rng, case)
            if failure:
                break
        results.append(CheckResult("structural", f"{name} ({per_check} cases)", failure is None,
                                   detail=failure or ""))
    return results


def suite_presets() -> List[CheckResult]:
    results = []
    for name, quoted in QUOTED_PRESETS.items():
        preset = NAMED_PRESETS[name]
        for attribute, value in quoted.items():
            got = getattr(preset, attribute)
            results.append(CheckResult("presets", f"{name}.{attribute}", got == value,
                                       detail="" if got == value else f"got {got}, expected {value}"))
    return results


def suite_determinism(probe: ModelPreset, weights: LayerWeights, f: FeatureMap,
                      threads: int) -> List[CheckResult]:
    many = max(2, threads)
    capture = (0, 0, 0)
    single_out, single_trace = run_cascade(probe, weights, f, Variant.PFA, threads=1, capture=capture)
    multi_out, multi_trace = run_cascade(probe, weights, f, Variant.PFA, threads=many, capture=capture)
    same_csv = stats_frame(single_trace).to_csv(index=False) == stats_frame(multi_trace).to_csv(index=False)
    same_rows = all(np.array_equal(a.captured_row, b.captured_row)
                    for a, b in zip(single_trace.layers, multi_trace.layers))
    return [
        CheckResult("determinism", f"output identical for 1 and {many} threads",
                    np.array_equal(single_out.values, multi_out.values)),
        CheckResult("determinism", f"stats CSV identical for 1 and {many} threads", same_csv),
        CheckResult("determinism", "captured attention rows identical", same_rows),
    ]


def run_verification(options: Optional[VerifyOptions] = None,
                     progress: Optional[Callable[[str], None]] = None) -> VerificationReport:
    """Run every suite; progress, when given, is called with each suite name."""
    options = options or VerifyOptions()
    started = time.perf_counter()
    probe = options.probe
    weights = build_weights(probe, options.seed)
    f = synthetic_input(*probe_geometry(probe), probe.channels, options.seed)
    report = VerificationReport()

    def stage(name, fn, *args):
        if progress is not None:
            progress(name)
        t0 = time.perf_counter()
        out = fn(*args)
        debug_log(f"Suite {name} finished in {time.perf_counter() - t0:.2f}s", "VERIFY")
        return out

    report.checks += stage("oracle-chains", suite_oracle_chains, options.seeds, options.inject_fault)
    degenerate, report.equivalence_line = stage("degenerate", suite_degenerate, probe, f, options.seed)
    report.checks += degenerate
    report.checks += stage("oracle-cascade", suite_oracle_cascade, probe, weights, f)
    report.checks += stage("schedule", suite_schedule)
    report.checks += stage("reconciliation", suite_reconciliation, probe, weights, f)
    report.checks += stage("structural", suite_structural, options.property_cases, options.seed)
    report.checks += stage("presets", suite_presets)
    report.checks += stage("determinism", suite_determinism, probe, weights, f, options.threads)
    report.elapsed_s = time.perf_counter() - started

    level = "INFO" if report.passed else "ERROR"
    debug_log(f"Verification finished: {len(report.checks) - len(report.failures)}/{len(report.checks)} "
              f"checks passed in {report.elapsed_s:.1f}s", "VERIFY", level)
    return report
