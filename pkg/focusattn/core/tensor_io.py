# focusattn/core/tensor_io.py

"""
File formats owned by the harness:

- raw feature tensors: magic "PFT1", u32 h, u32 w, u32 c (little endian),
  then h*w*c little-endian float64 values, channel-last
- binary PGM (P5, 16-bit) heatmaps of one attention row laid out on the window
- history.json with the cascade's per-layer execution records
- synthetic inputs (seeded noise, planted repeated texture)
"""

import json
from pathlib import Path
from typing import List, Union

import numpy as np

from focusattn.core.debug_logger import debug_log
from focusattn.core.dense_ops import Distribution, seeded_fill
from focusattn.core.errors import TensorFormatError
from focusattn.core.windows import FeatureMap

TENSOR_MAGIC = b"PFT1"
TENSOR_HEADER = np.dtype([("magic", "S4"), ("h", "<u4"), ("w", "<u4"), ("c", "<u4")])
PGM_MAX = 65535

PathLike = Union[str, Path]


def write_tensor(path: PathLike, f: FeatureMap) -> Path:
    path = Path(path)
    header = np.array([(TENSOR_MAGIC, f.h, f.w, f.c)], dtype=TENSOR_HEADER)
    with open(path, "wb") as out:
        out.write(header.tobytes())
        out.write(f.values.astype("<f8").tobytes(order="C"))
    debug_log(f"Wrote tensor {f.shape} to {path}", "TENSOR_IO")
    return path


def read_tensor(path: PathLike) -> FeatureMap:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as e:
        raise TensorFormatError(f"cannot read tensor file {path}: {e}")
    if len(raw) < TENSOR_HEADER.itemsize:
        raise TensorFormatError(f"{path} is too short for a tensor header ({len(raw)} bytes)")
    header = np.frombuffer(raw, dtype=TENSOR_HEADER, count=1)[0]
    if header["magic"] != TENSOR_MAGIC:
        raise TensorFormatError(f"{path} has magic {header['magic']!r}, expected {TENSOR_MAGIC!r}")
    h, w, c = int(header["h"]), int(header["w"]), int(header["c"])
    expected = TENSOR_HEADER.itemsize + 8 * h * w * c
    if len(raw) != expected:
        raise TensorFormatError(f"{path} holds {len(raw)} bytes, header {h}x{w}x{c} needs {expected}")
    values = np.frombuffer(raw, dtype="<f8", offset=TENSOR_HEADER.itemsize).reshape(h, w, c)
    if not np.isfinite(values).all():
        raise TensorFormatError(f"{path} contains non-finite values")
    debug_log(f"Read tensor {h}x{w}x{c} from {path}", "TENSOR_IO")
    return FeatureMap(values)


def heatmap_levels(weights: np.ndarray) -> np.ndarray:
    """Min-max scale to 0..65535; a constant map is all-max when positive, else all zero."""
    low, high = float(weights.min()), float(weights.max())
    if high == low:
        return np.full(weights.shape, PGM_MAX if high > 0 else 0, dtype=np.uint16)
    scaled = (weights - low) / (high - low)
    return np.rint(scaled * PGM_MAX).astype(np.uint16)


def write_pgm(path: PathLike, weights: np.ndarray) -> Path:
    """Binary P5 16-bit grayscale; samples are big endian per the PGM format."""
    path = Path(path)
    if weights.ndim != 2:
        raise TensorFormatError(f"heatmap must be 2-D, got shape {weights.shape}")
    rows, cols = weights.shape
    levels = heatmap_levels(weights)
    with open(path, "wb") as out:
        out.write(f"P5\n{cols} {rows}\n{PGM_MAX}\n".encode("ascii"))
        out.write(levels.astype(">u2").tobytes())
    return path


def read_pgm(path: PathLike) -> np.ndarray:
    """Reader for the files write_pgm produces."""
    raw = Path(path).read_bytes()
    parts = raw.split(b"\n", 3)
    if len(parts) != 4 or parts[0] != b"P5":
        raise TensorFormatError(f"{path} is not a binary PGM")
    cols, rows = (int(v) for v in parts[1].split())
    return np.frombuffer(parts[3], dtype=">u2").reshape(rows, cols).astype(np.uint16)


def save_history(history: List[dict], path: PathLike = "history.json") -> Path:
    path = Path(path)
    if path.suffix != ".json":
        raise TensorFormatError("Unsupported history file format.")
    with open(path, "w", encoding="utf-8") as out:
        json.dump(history, out, indent=2)
    return path


def load_history(path: PathLike) -> List[dict]:
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except json.JSONDecodeError as e:
        raise TensorFormatError(f"history file {path} is not valid JSON: {e}")


def synthetic_input(h: int, w: int, c: int, seed: int) -> FeatureMap:
    """Gaussian noise map, reproducible from the seed."""
    return FeatureMap(seeded_fill(h * w, c, seed, Distribution.GAUSSIAN).values.reshape(h, w, c), copy=False)


def planted_texture(h: int, w: int, c: int, seed: int, period: int = 4,
                    noise: float = 0.05) -> FeatureMap:
    """A period x period patch tiled over the map plus small noise."""
    patch = seeded_fill(period * period, c, seed, Distribution.GAUSSIAN).values.reshape(period, period, c)
    reps = (-(-h // period), -(-w // period), 1)
    tiled = np.tile(patch, reps)[:h, :w]
    jitter = seeded_fill(h * w, c, seed + 1, Distribution.GAUSSIAN, noise).values.reshape(h, w, c)
    return FeatureMap(tiled + jitter, copy=False)
