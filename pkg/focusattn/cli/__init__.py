# focusattn/cli/__init__.py

"""
Command-line interface: `pfa verify | bench | run | flops | compare`.
"""

from .main import app, cli_main
from .config import RunConfig, load_config, resolve_config, save_config

__all__ = [
    'app',
    'cli_main',
    'RunConfig',
    'load_config',
    'resolve_config',
    'save_config',
]
