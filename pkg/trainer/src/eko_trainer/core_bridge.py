"""Boundary to the clustering core: the .ekf format and the eko CLI.

The trainer talks to the core exclusively through these two surfaces, so the
feature-file writer here is an independent implementation of the documented
format, not an import of the core's.
"""

from __future__ import annotations

import struct
import subprocess
import sys
from pathlib import Path

import numpy as np

_EKF_HEADER = struct.Struct("<4sIIBf")
_EKF_MAGIC = b"EKF1"


def write_ekf(rows: np.ndarray, path: str | Path) -> None:
    """Write float32 feature rows in the core's .ekf layout."""
    rows = np.ascontiguousarray(rows, dtype="<f4")
    if rows.ndim != 2 or rows.size == 0:
        raise ValueError(f"expected a non-empty 2-D matrix, got shape {rows.shape}")
    if not np.isfinite(rows).all():
        raise ValueError("refusing to write non-finite features")
    n, d = rows.shape
    with open(path, "wb") as fh:
        fh.write(_EKF_HEADER.pack(_EKF_MAGIC, n, d, 0, 0.0))
        fh.write(rows.tobytes())


def read_ekf(path: str | Path) -> np.ndarray:
    data = Path(path).read_bytes()
    magic, n, d, _flag, _weight = _EKF_HEADER.unpack_from(data)
    if magic != _EKF_MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}")
    return np.frombuffer(data, dtype="<f4", offset=_EKF_HEADER.size).reshape(n, d).copy()


def _run_core(args: list[str]) -> None:
    proc = subprocess.run(
        [sys.executable, "-m", "eko", *args],
        capture_output=True,
        text=True,
    )
    if proc.returncode != 0:
        raise RuntimeError(
            f"core invocation failed (eko {' '.join(args)}):\n{proc.stderr.strip()}"
        )


def cluster_representatives(
    features: np.ndarray, n_clusters: int, workdir: str | Path
) -> np.ndarray:
    """Cluster features through the core CLI; map each frame to its representative.

    Writes the features as .ekf, runs `eko cluster` and `eko sample`
    (middle policy), and parses the sample manifest's
    frame,cluster_start,cluster_end lines.
    """
    workdir = Path(workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    features_path = workdir / "iter_features.ekf"
    tree_path = workdir / "iter_tree.ekd"
    samples_path = workdir / "iter_samples.txt"

    write_ekf(features, features_path)
    _run_core(["cluster", "--features", str(features_path), "--constraint", "tight",
               "--out", str(tree_path)])
    _run_core(["sample", "--features", str(features_path), "--dendrogram", str(tree_path),
               "--budget", str(n_clusters), "--policy", "middle",
               "--out", str(samples_path)])

    n = features.shape[0]
    rep_of_frame = np.full(n, -1, dtype=np.int64)
    lines = samples_path.read_text().splitlines()
    for line in lines[1:]:  # first line is the policy/budget header
        line = line.strip()
        if not line:
            continue
        frame_id, start, end = (int(v) for v in line.split(","))
        rep_of_frame[start : end + 1] = frame_id
    if (rep_of_frame < 0).any():
        raise RuntimeError(f"sample manifest {samples_path} does not cover every frame")
    return rep_of_frame
