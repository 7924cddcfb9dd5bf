from .cascade import FocusCascade, Variant, run_cascade
from .errors import FocusAttentionError
from .presets import build_preset, k_for_layer

__all__ = ["FocusCascade", "FocusAttentionError", "Variant", "build_preset", "k_for_layer", "run_cascade"]
