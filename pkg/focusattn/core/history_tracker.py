"""
focusattn/core/history_tracker.py

Decorator that records every cascade layer execution for reproducibility.
The history ends up in history.json next to the run's CSV exports.
"""

import time
from enum import Enum
from functools import wraps

from focusattn.core.debug_logger import debug_log
from focusattn.core.windows import FeatureMap


def LayerCommand(function=None, history_list=None):
    """
    Decorator that tracks one cascade layer.

    The wrapped callable must take (layer, feature_map, **kwargs) and return
    the layer's output FeatureMap. Captured per call:
    - function name, layer index and keyword arguments (variant, shift, K, ...)
    - feature map shape before and after
    - wall time of the layer in seconds

    Args:
        function: The function to be decorated
        history_list (list, optional): List to append records to.
                                     If None, nothing is recorded.

    Returns:
        function: Decorated function that executes original logic plus tracking

    Example:
        >>> history = []
        >>> step = LayerCommand(function=run_layer, history_list=history)
        >>> out = step(3, fmap, variant="pfa", k=64)
        >>> history[-1]["layer"]
        3
    """
    def decorator(func):
        @wraps(func)
        def wrapper(layer, fmap, **kwargs):
            debug_log(f"Layer {layer}: {func.__name__} with {kwargs}", "HISTORY")
            shape_before = fmap.shape if isinstance(fmap, FeatureMap) else None

            started = time.perf_counter()
            result = func(layer, fmap, **kwargs)
            elapsed = time.perf_counter() - started

            shape_after = result.shape if isinstance(result, FeatureMap) else None
            debug_log(f"Layer {layer} finished in {elapsed:.4f}s, shape {shape_before} -> {shape_after}",
                      "HISTORY")

            if history_list is not None:
                history_list.append({
                    "function": func.__name__,
                    "layer": layer,
                    "kwargs": {k: _plain(v) for k, v in kwargs.items()},
                    "shape_change": {
                        "before": list(shape_before) if shape_before else None,
                        "after": list(shape_after) if shape_after else None,
                    },
                    "elapsed_s": elapsed,
                })
            return result

        return wrapper

    return decorator(function)


def _plain(value):
    """JSON-friendly view of enum, tuple and numpy scalar arguments."""
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, tuple):
        return [_plain(v) for v in value]
    if hasattr(value, "item"):
        return value.item()
    return value
