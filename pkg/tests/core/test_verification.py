import numpy as np
import pytest

from focusattn.core.presets import build_weights
from focusattn.core.tensor_io import synthetic_input
from focusattn.core.verification import (
    PROBE_PRESET,
    CheckResult,
    VerificationReport,
    VerifyOptions,
    probe_geometry,
    run_verification,
    suite_degenerate,
    suite_determinism,
    suite_oracle_cascade,
    suite_oracle_chains,
    suite_presets,
    suite_reconciliation,
    suite_schedule,
    suite_structural,
)


@pytest.fixture
def probe_map(tiny_preset):
    return synthetic_input(*probe_geometry(tiny_preset), tiny_preset.channels, 0)


class TestSuites:
    def test_oracle_chains_pass(self):
        results = suite_oracle_chains(seeds=2)
        assert len(results) == 3 * 3 * 2
        assert all(r.passed for r in results), [r.detail for r in results if not r.passed]

    def test_injected_fault_is_caught_with_coordinates(self):
        """A 1e-6 nudge of one weight fails the check and names where."""
        # Act
        results = suite_oracle_chains(seeds=1, inject_fault=True)

        # Assert
        failed = [r for r in results if not r.passed]
        assert len(failed) == 1
        assert failed[0].check == "N=16 d=2 halving"
        assert "row=5" in failed[0].detail
        assert failed[0].max_diff > 0.9e-6

    def test_degenerate_equivalence_line(self, tiny_preset, probe_map):
        # Act
        results, line = suite_degenerate(tiny_preset, probe_map, seed=0)

        # Assert
        assert all(r.passed for r in results)
        assert line.startswith("pfa ≡ vanilla (K = N = 16")
        assert "max |diff|" in line

    def test_oracle_cascade_and_invariants(self, tiny_preset, tiny_weights, probe_map):
        results = suite_oracle_cascade(tiny_preset, tiny_weights, probe_map)
        assert {r.suite for r in results} == {"oracle-cascade", "chain-invariants"}
        assert all(r.passed for r in results), [r.detail for r in results if not r.passed]

    def test_schedule_examples(self):
        assert all(r.passed for r in suite_schedule())

    def test_reconciliation(self, tiny_preset, tiny_weights, probe_map):
        results = suite_reconciliation(tiny_preset, tiny_weights, probe_map)
        assert len(results) == 6
        assert all(r.passed for r in results), [r.detail for r in results if not r.passed]

    def test_structural_properties(self):
        results = suite_structural(cases=50, seed=1)
        assert len(results) == 5
        assert all(r.passed for r in results), [r.detail for r in results if not r.passed]

    def test_quoted_presets(self):
        assert all(r.passed for r in suite_presets())

    def test_determinism(self, tiny_preset, tiny_weights, probe_map):
        results = suite_determinism(tiny_preset, tiny_weights, probe_map, threads=3)
        assert all(r.passed for r in results)


class TestReport:
    def test_suite_summary_keeps_order_and_worst_diff(self):
        # Arrange
        report = VerificationReport(checks=[
            CheckResult("b", "one", True, 1e-12),
            CheckResult("a", "two", False, detail="row=3"),
            CheckResult("b", "three", True, 1e-11),
        ])

        # Act
        suites = report.suites()

        # Assert
        assert [s[0] for s in suites] == ["b", "a"]
        assert suites[0][1:3] == (2, 2)
        assert suites[0][3] == 1e-11
        assert np.isnan(suites[1][3])
        assert not report.passed
        assert [f.check for f in report.failures] == ["two"]
        assert list(report.to_frame().columns) == ["suite", "check", "passed", "max_diff", "detail"]


@pytest.mark.slow
class TestRunVerification:
    def test_small_run_passes(self, tiny_preset):
        """The whole pipeline on a small probe with few seeds."""
        # Arrange
        stages = []
        options = VerifyOptions(seeds=2, property_cases=25, threads=2, probe=tiny_preset)

        # Act
        report = run_verification(options, progress=stages.append)

        # Assert
        assert report.passed, [(f.check, f.detail) for f in report.failures]
        assert stages[0] == "oracle-chains"
        assert "determinism" in stages
        assert report.elapsed_s > 0

    def test_default_probe_geometry_is_padded(self):
        h, w = probe_geometry(PROBE_PRESET)
        assert (h, w) == (16, 20)
        assert w % PROBE_PRESET.window_size != 0
        build_weights(PROBE_PRESET, 0)
