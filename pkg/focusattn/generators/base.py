# focusattn/generators/base.py

from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from jinja2 import Environment, FileSystemLoader

from focusattn.core.debug_logger import debug_log

TEMPLATES_DIR = Path(__file__).parent / "templates"

REPORT_TEMPLATES = {
    "verify": "verify_report.txt.j2",
    "flops": "flops_report.txt.j2",
    "run": "run_summary.txt.j2",
}


class ReportGenerator:
    """Renders the human-readable reports that accompany every CSV export."""

    def __init__(self, kind: str, templates_dir: Optional[Union[str, Path]] = None):
        if kind not in REPORT_TEMPLATES:
            raise ValueError(f"Unknown report kind '{kind}'. Available: {', '.join(REPORT_TEMPLATES)}")
        self.kind = kind
        self.templates_dir = Path(templates_dir) if templates_dir else TEMPLATES_DIR
        self.env = Environment(
            loader=FileSystemLoader(str(self.templates_dir)),
            trim_blocks=True,
            lstrip_blocks=True,
            keep_trailing_newline=True,
        )
        self.env.filters["thousands"] = lambda n: f"{int(n):,}"
        self.env.filters["percent"] = lambda x: f"{100 * float(x):.4g}%"
        self.context: Dict[str, Any] = {}

    def available_templates(self) -> List[str]:
        return sorted(p.name for p in self.templates_dir.glob("*.j2"))

    def load_context(self, **context) -> Dict[str, Any]:
        self.context.update(context)
        return self.context

    def render(self, date: Optional[str] = None) -> str:
        if not self.context:
            raise ValueError("No report data loaded; call load_context first.")
        template = self.env.get_template(REPORT_TEMPLATES[self.kind])
        return template.render(date=date or datetime.now().strftime("%Y-%m-%d %H:%M:%S"), **self.context)

    def export_report(self, filename: Union[str, Path], date: Optional[str] = None) -> Path:
        path = Path(filename)
        path.write_text(self.render(date), encoding="utf-8")
        debug_log(f"Exported {self.kind} report to {path}", "GENERATOR")
        return path
