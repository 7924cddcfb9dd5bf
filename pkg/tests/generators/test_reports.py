from fractions import Fraction

import pytest

from focusattn.core.metrics import LayerCost, LayerStats
from focusattn.core.verification import CheckResult
from focusattn.generators.base import REPORT_TEMPLATES, ReportGenerator

DATE = "2024-01-01 00:00:00"


@pytest.fixture
def verify_context():
    return dict(
        suites=[("oracle-chains", 2, 2, 1e-12), ("schedule", 1, 1, float("nan"))],
        failures=[],
        total_checks=3,
        equivalence_line="pfa ≡ vanilla (K = N = 16, one layer per parity): max |diff| = 0.000e+00",
        elapsed_s=1.25,
        probe_name="tiny",
        window_size=4,
        channels=8,
        heads=2,
    )


class TestReportGeneratorInitialization:
    def test_known_kinds(self):
        for kind in REPORT_TEMPLATES:
            assert ReportGenerator(kind).kind == kind

    def test_unknown_kind(self):
        with pytest.raises(ValueError, match="Unknown report kind"):
            ReportGenerator("html")

    def test_available_templates(self):
        templates = ReportGenerator("verify").available_templates()
        assert "macros.j2" in templates
        assert set(REPORT_TEMPLATES.values()) <= set(templates)


class TestVerifyReport:
    def test_render_requires_context(self):
        with pytest.raises(ValueError, match="load_context"):
            ReportGenerator("verify").render(DATE)

    def test_passing_report(self, verify_context):
        """Suite lines, the equivalence line and the closing verdict."""
        # Arrange
        generator = ReportGenerator("verify")
        generator.load_context(**verify_context)

        # Act
        text = generator.render(DATE)

        # Assert
        assert f"Generated: {DATE}" in text
        assert "Probe preset: tiny (W=4, C=8, heads=2)" in text
        assert verify_context["equivalence_line"] in text
        assert "max diff 1.000e-12" in text
        assert "All 3 checks passed." in text

    def test_failures_listed(self, verify_context):
        # Arrange
        generator = ReportGenerator("verify")
        failure = CheckResult("oracle-chains", "N=16 d=2 halving", False, 1e-6, "row=5 col=3")
        generator.load_context(**{**verify_context, "failures": [failure]})

        # Act
        text = generator.render(DATE)

        # Assert
        assert "FAILED (1 checks)" in text
        assert "[oracle-chains] N=16 d=2 halving: row=5 col=3" in text


class TestFlopsAndRunReports:
    def test_flops_table(self):
        # Arrange
        costs = [LayerCost(1, 256, 1000, 2000), LayerCost(2, 128, 1000, 1000)]
        generator = ReportGenerator("flops")
        generator.load_context(preset_name="custom", h=64, w=64, channels=8, window_size=16, layers=2,
                               focus="geometric alpha = 1/2", block_ks=[256], costs=costs,
                               omega_sa=6000, omega_pfa=5000, ratio=Fraction(5, 6),
                               attention_ratio=Fraction(3, 4))

        # Act
        text = generator.render(DATE)

        # Assert
        assert "Omega(SA)  = 6,000 MACs  (12,000 FLOPs)" in text
        assert "= 5/6" in text
        assert "50%" in text

    def test_run_summary_marks_missing_overlap(self):
        # Arrange
        stats = [
            LayerStats(1, "odd", 16.0, 16, 2.5, float("nan"), 1.0, 1.0),
            LayerStats(2, "even", 4.0, 4, 1.2, 1.0, 0.9, 1.0),
        ]
        generator = ReportGenerator("run")
        generator.load_context(preset_name="tiny", variant="pfa", seed=0, threads=1, input_desc="synthetic",
                               padded_hw=(8, 12), num_windows=6, renormalize=False, stats=stats, ks=[16, None],
                               score_macs=1234, aggregate_macs=5678, projection_macs=9, outputs=["stats.csv"])

        # Act
        lines = generator.render(DATE).splitlines()

        # Assert
        layer_one = next(line for line in lines if line.strip().startswith("1 "))
        layer_two = next(line for line in lines if line.strip().startswith("2 "))
        assert layer_one.rstrip().endswith("-")
        assert layer_two.rstrip().endswith("1.000")
        assert "wrote stats.csv" in lines

    def test_export_writes_file(self, tmp_path, verify_context):
        # Arrange
        generator = ReportGenerator("verify")
        generator.load_context(**verify_context)

        # Act
        path = generator.export_report(tmp_path / "report.txt", date=DATE)

        # Assert
        assert path.read_text(encoding="utf-8") == generator.render(DATE)
