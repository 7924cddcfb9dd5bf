# focusattn/cli/config.py

import os
from dataclasses import asdict, dataclass, fields
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple, Union

from focusattn.core.cascade import Variant
from focusattn.core.errors import ConfigError
from focusattn.core.presets import NAMED_PRESETS, LayerWeights, ModelPreset, as_fraction, build_preset

# Exit-code contract
EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_CONFIG_ERROR = 2

THREADS_ENV = "PFA_THREADS"
SUPPORTED_PRESETS = list(NAMED_PRESETS) + ["custom"]
SUPPORTED_VARIANTS = [v.value for v in Variant]

RUN_DEFAULT_HW = (64, 64)
# output resolution used for cost reporting
FLOPS_DEFAULT_HW = (640, 1280)

CSV_FLOAT_FORMAT = "%.17g"

# Micro-benchmark grid
BENCH_SIZES = [256, 1024]
BENCH_DIMS = [32, 64]
BENCH_DENSITIES = [Fraction(1), Fraction(1, 4), Fraction(1, 16), Fraction(1, 64)]
BENCH_WARMUP = 5
BENCH_ITERATIONS = 20
BENCH_TARGET = (1024, 64, Fraction(1, 16))
BENCH_MAX_RATIO = 0.35

OUTPUT_FILES = {
    "stats": "stats.csv",
    "history": "history.json",
    "config": "run.cfg",
    "run_report": "run_summary.txt",
    "verify_csv": "verify.csv",
    "verify_report": "verify_report.txt",
    "bench": "bench.csv",
    "flops_csv": "flops.csv",
    "flops_report": "flops_report.txt",
    "compare": "compare.csv",
    "heatmap": "attention_L{layer:02d}.pgm",
    "input": "input.pft",
}

MESSAGES = {
    "config_error": "Configuration error: {error}",
    "file_not_found": "Config file not found: {path}",
    "bad_line": "{path}:{line}: expected key=value, got '{text}'",
    "unknown_key": "{path}:{line}: unknown config key '{key}' (known: {known})",
    "alpha_warning": "alpha={alpha} is below 0.1; focusing will be premature",
    "verify_passed": "All {count} checks passed",
    "verify_failed": "{count} check(s) failed",
    "saved": "Wrote {path}",
    "bench_flagged": "smm_scores ratio {ratio:.3f} exceeds {limit}: kernel flagged as too naive",
    "bench_ok": "smm_scores ratio {ratio:.3f} is within {limit}",
    "summary_title": "Run Summary",
}


def parse_int_list(text: str) -> List[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise ConfigError(f"expected a comma-separated list of integers, got '{text}'")


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got '{text}'")


def _parse_int(text: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise ConfigError(f"expected an integer, got '{text}'")


def _parse_alpha(text: str) -> Fraction:
    try:
        return as_fraction(text.strip())
    except (ValueError, ZeroDivisionError):
        raise ConfigError(f"expected a focus ratio such as 0.5 or 1/2, got '{text}'")


def _format_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (list, tuple)):
        return ",".join(str(v) for v in value)
    if isinstance(value, Variant):
        return value.value
    return str(value)


@dataclass
class RunConfig:
    """Every harness setting; keys double as config-file keys and CLI flag names."""

    preset: str = "desk"
    blocks: Optional[List[int]] = None
    heads: Optional[int] = None
    channels: Optional[int] = None
    window: Optional[int] = None
    k_list: Optional[List[int]] = None
    alpha: Optional[Fraction] = None
    variant: Variant = Variant.PFA
    renorm_topk: bool = False
    topk_k: Optional[int] = None
    seed: int = 0
    height: Optional[int] = None
    width: Optional[int] = None
    input: Optional[str] = None
    out: str = "pfa_out"
    threads: int = 1
    heatmap: Optional[str] = None

    def __post_init__(self):
        try:
            self.variant = Variant(self.variant)
        except ValueError:
            raise ConfigError(f"unknown variant '{self.variant}' (choose from {', '.join(SUPPORTED_VARIANTS)})")
        if self.preset not in SUPPORTED_PRESETS:
            raise ConfigError(f"unknown preset '{self.preset}' (choose from {', '.join(SUPPORTED_PRESETS)})")
        if self.threads < 1:
            raise ConfigError(f"threads must be >= 1, got {self.threads}")
        if self.alpha is not None and not isinstance(self.alpha, Fraction):
            self.alpha = _parse_alpha(str(self.alpha))
        for name in ("height", "width"):
            value = getattr(self, name)
            if value is not None and value < 1:
                raise ConfigError(f"{name} must be >= 1, got {value}")

    def preset_overrides(self) -> Dict[str, Any]:
        return dict(blocks=self.blocks, heads=self.heads, channels=self.channels,
                    window_size=self.window, k_list=self.k_list, alpha=self.alpha)

    def build(self) -> Tuple[ModelPreset, LayerWeights]:
        return build_preset(self.preset, self.seed, **self.preset_overrides())

    def geometry(self, default: Tuple[int, int] = RUN_DEFAULT_HW) -> Tuple[int, int]:
        return (self.height or default[0], self.width or default[1])

    def heatmap_selection(self) -> Optional[Tuple[int, int, int]]:
        """(window, head, row) parsed from 'window,head,row'."""
        if self.heatmap is None:
            return None
        parts = parse_int_list(self.heatmap)
        if len(parts) != 3 or min(parts) < 0:
            raise ConfigError(f"heatmap selection must be 'window,head,row' with non-negative values, "
                              f"got '{self.heatmap}'")
        return tuple(parts)

    def out_dir(self) -> Path:
        path = Path(self.out)
        try:
            path.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise ConfigError(f"cannot create output directory {path}: {e}")
        if not os.access(path, os.W_OK):
            raise ConfigError(f"output directory {path} is not writable")
        return path


CONFIG_PARSERS: Dict[str, Callable[[str], Any]] = {
    "preset": str.strip,
    "blocks": parse_int_list,
    "heads": _parse_int,
    "channels": _parse_int,
    "window": _parse_int,
    "k_list": parse_int_list,
    "alpha": _parse_alpha,
    "variant": str.strip,
    "renorm_topk": _parse_bool,
    "topk_k": _parse_int,
    "seed": _parse_int,
    "height": _parse_int,
    "width": _parse_int,
    "input": str.strip,
    "out": str.strip,
    "threads": _parse_int,
    "heatmap": str.strip,
}


def parse_config_text(text: str, source: str = "<config>") -> Dict[str, Any]:
    """Flat key=value lines; '#' starts a comment, blank lines are skipped."""
    values = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(MESSAGES["bad_line"].format(path=source, line=number, text=raw.strip()))
        key, value = (part.strip() for part in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in CONFIG_PARSERS:
            raise ConfigError(MESSAGES["unknown_key"].format(path=source, line=number, key=key,
                                                             known=", ".join(CONFIG_PARSERS)))
        values[key] = CONFIG_PARSERS[key](value)
    return values


def load_config(path: Union[str, Path]) -> Dict[str, Any]:
    path = Path(path)
    if not path.exists():
        raise ConfigError(MESSAGES["file_not_found"].format(path=path))
    return parse_config_text(path.read_text(encoding="utf-8"), str(path))


def save_config(config: RunConfig, path: Union[str, Path]) -> Path:
    """Write every set key; load_config on the result gives back the same RunConfig."""
    lines = [f"{key} = {_format_value(value)}" for key, value in asdict(config).items() if value is not None]
    path = Path(path)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def default_threads() -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw is None or not raw.strip():
        return 1
    threads = _parse_int(raw)
    if threads < 1:
        raise ConfigError(f"{THREADS_ENV} must be >= 1, got {threads}")
    return threads


def resolve_config(config_file: Optional[Union[str, Path]] = None, **flags) -> RunConfig:
    """Defaults < PFA_THREADS < config file < CLI flags (None means 'not given')."""
    values: Dict[str, Any] = {"threads": default_threads()}
    if config_file:
        values.update(load_config(config_file))
    known = {f.name for f in fields(RunConfig)}
    values.update({k: v for k, v in flags.items() if v is not None and k in known})
    return RunConfig(**values)
