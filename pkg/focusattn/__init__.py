from .core import FocusCascade, FocusAttentionError, Variant, build_preset, k_for_layer, run_cascade
from .generators import ReportGenerator

__all__ = ["FocusCascade", "FocusAttentionError", "ReportGenerator", "Variant", "build_preset",
           "k_for_layer", "run_cascade"]
