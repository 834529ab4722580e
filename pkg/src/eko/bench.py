"""Evaluation harness: methods x policies x selectivities over a labeled stream.

Offline work (clustering, sampling, store encoding) happens once per
configuration; the timed portion covers only opening the store, decoding the
sampled frames, propagating labels and scoring them, mirroring how queries
are answered after ingestion.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .clustering import Connectivity, Dendrogram, agglomerate
from .errors import InputError
from .features import FeatureMatrix
from .frames import FramePayload, FrameSequence
from .propagation import LabelVector, evaluate, propagate
from .sampling import (
    Policy,
    SampleSet,
    gop_baseline,
    samples_for_budget,
    uniform_baseline,
)
from .storage import encode_store, open_store

METHODS = ("eko", "uniform", "gop")


@dataclass(frozen=True)
class BenchRow:
    method: str
    policy: str
    selectivity: float
    precision: float
    recall: float
    f1: float
    wall_ms: float
    bytes_read: int


def budget_for_selectivity(selectivity: float, n: int) -> int:
    if not (0 < selectivity <= 1):
        raise InputError(f"selectivity must be in (0, 1], got {selectivity}")
    return max(1, round(selectivity * n))


def frames_from_features(
    f: FeatureMatrix, width: int = 8, height: int = 8
) -> FrameSequence:
    """Render each feature row as a small grayscale frame (deterministic).

    Lets synthetic streams exercise the full encode/decode path without real
    video: coordinates are affinely mapped to bytes and tiled to fill the
    frame.
    """
    n, d = f.n, f.d
    scaled = np.clip(f.rows.astype(np.float64) * 32.0 + 128.0, 0, 255).astype(np.uint8)
    size = width * height
    reps = -(-size // d)  # ceil
    frames = tuple(
        FramePayload(frame_id=i, pixels=np.tile(scaled[i], reps)[:size].tobytes())
        for i in range(n)
    )
    return FrameSequence(frames=frames, width=width, height=height, channels=1)


def oracle_sample_labels(s: SampleSet, truth: LabelVector) -> dict[int, int]:
    """Ground-truth labels at the sampled frames (a perfect detector stand-in)."""
    return {fid: int(truth.labels[fid]) for fid in s.frame_ids}


def _sample(
    method: str,
    policy: Policy,
    budget: int,
    n: int,
    dendrogram: Dendrogram | None,
    features: FeatureMatrix,
) -> SampleSet:
    if method == "eko":
        if dendrogram is None:
            raise InputError("eko method needs a dendrogram")
        return samples_for_budget(dendrogram, features, budget, policy)
    if method == "uniform":
        return uniform_baseline(n, budget)
    if method == "gop":
        return gop_baseline(n, max(1, round(n / budget)))
    raise InputError(f"unknown method {method!r}")


def run_bench(
    features: FeatureMatrix,
    truth: LabelVector,
    selectivities: list[float],
    policies: list[Policy],
    methods: list[str] = list(METHODS),
    workdir: str | Path = ".",
    constraint: Connectivity | None = None,
    codec: str = "raw",
) -> list[BenchRow]:
    if features.n != truth.n:
        raise InputError(f"features cover {features.n} frames, truth {truth.n}")
    for m in methods:
        if m not in METHODS:
            raise InputError(f"unknown method {m!r}")
    workdir = Path(workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    n = features.n
    seq = frames_from_features(features)
    dendrogram = None
    if "eko" in methods:
        dendrogram = agglomerate(features, constraint or Connectivity.tight())

    rows: list[BenchRow] = []
    for method in methods:
        method_policies = policies if method == "eko" else [None]
        for policy in method_policies:
            for selectivity in selectivities:
                budget = budget_for_selectivity(selectivity, n)
                sample_set = _sample(
                    method, policy or Policy.MIDDLE, budget, n, dendrogram, features
                )
                store_path = workdir / f"bench_{method}_{policy.value if policy else 'na'}_{selectivity:g}.ekv"
                encode_store(seq, sample_set, sample_set.clustering, codec, store_path)
                labels = oracle_sample_labels(sample_set, truth)

                start = time.perf_counter()
                with open_store(store_path) as handle:
                    handle.read(sample_set.frame_ids)
                    bytes_read = handle.bytes_read
                predicted = propagate(sample_set, sample_set.clustering, labels)
                metrics = evaluate(predicted, truth)
                wall_ms = (time.perf_counter() - start) * 1000.0

                rows.append(
                    BenchRow(
                        method=method,
                        policy=policy.value if policy else "-",
                        selectivity=selectivity,
                        precision=metrics.precision,
                        recall=metrics.recall,
                        f1=metrics.f1,
                        wall_ms=wall_ms,
                        bytes_read=bytes_read,
                    )
                )
    return rows


def rows_to_csv(rows: list[BenchRow]) -> str:
    lines = ["method,policy,selectivity,precision,recall,f1,wall_ms,bytes_read"]
    for r in rows:
        lines.append(
            f"{r.method},{r.policy},{r.selectivity:g},{r.precision:.6f},"
            f"{r.recall:.6f},{r.f1:.6f},{r.wall_ms:.3f},{r.bytes_read}"
        )
    return "\n".join(lines) + "\n"
