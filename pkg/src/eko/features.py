"""Per-frame feature vectors: pixel-grid extraction, temporal channel, .ekf files.

Feature rows are kept as float32 so that the on-disk format round-trips
bit-exactly.
"""

from __future__ import annotations

import math
import os
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError, InputError
from .frames import FrameSequence

_EKF_MAGIC = b"EKF1"
_EKF_HEADER = struct.Struct("<4sIIBf")  # magic, n, d, temporal flag, temporal weight

# ITU-R BT.601 luma weights.
_LUMA = np.array([0.299, 0.587, 0.114])


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    """n rows of d float32 features, optionally ending in a temporal ramp."""

    rows: np.ndarray
    has_temporal_channel: bool = False
    temporal_weight: float = 0.0

    def __post_init__(self):
        rows = np.ascontiguousarray(self.rows, dtype=np.float32)
        if rows.ndim != 2:
            raise InputError(f"feature rows must be 2-D, got shape {rows.shape}")
        n, d = rows.shape
        if n < 1 or d < 1:
            raise InputError(f"feature matrix needs n >= 1 and d >= 1, got {n}x{d}")
        if not np.isfinite(rows).all():
            raise InputError("feature rows contain non-finite values")
        if not (self.temporal_weight >= 0 and math.isfinite(self.temporal_weight)):
            raise InputError(f"temporal_weight must be finite and >= 0, got {self.temporal_weight}")
        rows.setflags(write=False)
        object.__setattr__(self, "rows", rows)

    @property
    def n(self) -> int:
        return self.rows.shape[0]

    @property
    def d(self) -> int:
        return self.rows.shape[1]

    def __eq__(self, other) -> bool:
        if not isinstance(other, FeatureMatrix):
            return NotImplemented
        return (
            self.rows.shape == other.rows.shape
            and np.array_equal(self.rows, other.rows)
            and self.has_temporal_channel == other.has_temporal_channel
            and self.temporal_weight == other.temporal_weight
        )


def worker_count(workers: int | None = None) -> int:
    """Resolve a worker count; the EKO_THREADS env var caps it."""
    if workers is None:
        workers = int(os.environ.get("EKO_THREADS", "1"))
    cap = os.environ.get("EKO_THREADS")
    if cap is not None:
        workers = min(workers, int(cap))
    return max(1, workers)


def _band_means(values: np.ndarray, bands: int) -> np.ndarray:
    """Exact area-weighted means of `values` over `bands` equal fractional bands.

    Works along axis 0; remaining axes pass through.  Band edges fall at
    j*L/bands, so cells that straddle pixel boundaries weight the shared
    pixel by the overlapped fraction.
    """
    length = values.shape[0]
    csum = np.zeros((length + 1,) + values.shape[1:], dtype=np.float64)
    np.cumsum(values, axis=0, out=csum[1:])

    def integral(x: float) -> np.ndarray:
        i = int(math.floor(x))
        if i >= length:
            return csum[length]
        return csum[i] + (x - i) * values[i]

    out = np.empty((bands,) + values.shape[1:], dtype=np.float64)
    width = length / bands
    for j in range(bands):
        lo = j * length / bands
        hi = (j + 1) * length / bands
        out[j] = (integral(hi) - integral(lo)) / width
    return out


def extract_pixel_features(
    seq: FrameSequence,
    grid: int,
    grayscale: bool = True,
    workers: int | None = None,
) -> FeatureMatrix:
    """Downsample every frame to a grid of area-averaged cells scaled to [0, 1].

    Each frame is (optionally) converted to luma, partitioned into grid x grid
    cells by exact area averaging, flattened row-major and divided by 255.
    The result has d = grid**2 coordinates per frame (times 3 when color is
    kept).  Output is independent of the worker count.
    """
    if grid < 1:
        raise InputError(f"grid must be >= 1, got {grid}")
    if grid > min(seq.width, seq.height):
        raise InputError(
            f"grid {grid} exceeds the smaller frame dimension "
            f"{min(seq.width, seq.height)}"
        )
    n = seq.n
    d = grid * grid * (1 if (grayscale or seq.channels == 1) else seq.channels)
    out = np.empty((n, d), dtype=np.float32)

    def fill(frame_id: int) -> None:
        img = seq.pixel_array(frame_id).astype(np.float64)
        if grayscale and seq.channels == 3:
            img = img @ _LUMA
        elif seq.channels == 1:
            img = img[:, :, 0]
        rows_avg = _band_means(img, grid)
        cells = np.swapaxes(_band_means(np.swapaxes(rows_avg, 0, 1), grid), 0, 1)
        out[frame_id] = (cells / 255.0).reshape(-1)

    nworkers = worker_count(workers)
    if nworkers == 1 or n == 1:
        for i in range(n):
            fill(i)
    else:
        with ThreadPoolExecutor(max_workers=nworkers) as pool:
            list(pool.map(fill, range(n)))
    return FeatureMatrix(rows=out, has_temporal_channel=False, temporal_weight=0.0)


def append_temporal_channel(f: FeatureMatrix, weight: float) -> FeatureMatrix:
    """Append the coordinate weight*i/(n-1) to row i (0 for n = 1).

    The weight is quantized to float32 so the file format round-trips exactly.
    """
    if f.has_temporal_channel:
        raise InputError("feature matrix already has a temporal channel")
    if not (weight >= 0 and math.isfinite(weight)):
        raise InputError(f"temporal weight must be finite and >= 0, got {weight}")
    w32 = float(np.float32(weight))
    n = f.n
    if n == 1:
        ramp = np.zeros(1, dtype=np.float64)
    else:
        ramp = w32 * (np.arange(n, dtype=np.float64) / (n - 1))
    rows = np.hstack([f.rows, ramp.astype(np.float32)[:, None]])
    return FeatureMatrix(rows=rows, has_temporal_channel=True, temporal_weight=w32)


def l2_normalize(f: FeatureMatrix) -> FeatureMatrix:
    """Scale every row to unit L2 norm (zero rows are left untouched).

    Must be applied before the temporal channel, which has its own scale.
    """
    if f.has_temporal_channel:
        raise InputError("normalize before appending the temporal channel")
    norms = np.linalg.norm(f.rows.astype(np.float64), axis=1)
    norms[norms == 0.0] = 1.0
    rows = (f.rows.astype(np.float64) / norms[:, None]).astype(np.float32)
    return FeatureMatrix(rows=rows, has_temporal_channel=False, temporal_weight=0.0)


def write_feature_file(f: FeatureMatrix, path: str | Path) -> None:
    """Write the .ekf format: 17-byte header followed by n*d little-endian f32."""
    header = _EKF_HEADER.pack(
        _EKF_MAGIC, f.n, f.d, 1 if f.has_temporal_channel else 0, f.temporal_weight
    )
    body = np.ascontiguousarray(f.rows, dtype="<f4").tobytes()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(body)


def load_feature_file(path: str | Path) -> FeatureMatrix:
    """Read a .ekf file, rejecting anything malformed instead of repairing it."""
    data = Path(path).read_bytes()
    if len(data) < _EKF_HEADER.size:
        raise FormatError(f"{path}: file shorter than the header")
    magic, n, d, flag, weight = _EKF_HEADER.unpack_from(data)
    if magic != _EKF_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if n < 1 or d < 1:
        raise FormatError(f"{path}: header declares empty matrix {n}x{d}")
    if flag not in (0, 1):
        raise FormatError(f"{path}: bad temporal flag {flag}")
    expected = _EKF_HEADER.size + n * d * 4  # python ints: no overflow
    if len(data) != expected:
        raise FormatError(
            f"{path}: {len(data)} bytes on disk, header implies {expected}"
        )
    rows = np.frombuffer(data, dtype="<f4", offset=_EKF_HEADER.size).reshape(n, d)
    if not np.isfinite(rows).all():
        raise FormatError(f"{path}: non-finite feature values")
    if not math.isfinite(weight) or weight < 0:
        raise FormatError(f"{path}: bad temporal weight {weight}")
    return FeatureMatrix(
        rows=rows.copy(),
        has_temporal_channel=bool(flag),
        temporal_weight=float(weight),
    )
