"""Binary label propagation over clusters, accuracy metrics, synthetic streams."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numpy as np

from .clustering import Clustering
from .errors import FormatError, InputError
from .features import FeatureMatrix
from .sampling import SampleSet


@dataclass(frozen=True, eq=False)
class LabelVector:
    """One binary label per frame."""

    labels: np.ndarray

    def __post_init__(self):
        labels = np.ascontiguousarray(self.labels, dtype=np.uint8)
        if labels.ndim != 1 or labels.size < 1:
            raise InputError("labels must be a non-empty 1-D vector")
        if not np.isin(labels, (0, 1)).all():
            raise InputError("labels must be 0 or 1")
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return self.labels.shape[0]

    def __eq__(self, other) -> bool:
        if not isinstance(other, LabelVector):
            return NotImplemented
        return np.array_equal(self.labels, other.labels)


@dataclass(frozen=True)
class Metrics:
    """Confusion counts and derived scores, with 1 as the positive class."""

    tp: int
    fp: int
    fn: int
    tn: int
    precision: float
    recall: float
    f1: float

    @property
    def n(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    def as_dict(self) -> dict:
        return {
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
            "tn": self.tn,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
        }

    def to_text(self) -> str:
        return "\n".join(
            [
                f"tp={self.tp}",
                f"fp={self.fp}",
                f"fn={self.fn}",
                f"tn={self.tn}",
                f"precision={self.precision:.6f}",
                f"recall={self.recall:.6f}",
                f"f1={self.f1:.6f}",
            ]
        )


def propagate(s: SampleSet, cl: Clustering, sample_labels: Mapping[int, int]) -> LabelVector:
    """Give every frame the label assigned to its cluster's representative.

    ``sample_labels`` must cover exactly the sampled frame ids.
    """
    sampled = set(s.frame_ids)
    provided = set(sample_labels)
    if provided != sampled:
        missing = sorted(sampled - provided)[:5]
        extra = sorted(provided - sampled)[:5]
        raise InputError(f"sample labels mismatch: missing {missing}, extra {extra}")
    if len(s.entries) != cl.k:
        raise InputError(f"sample set has {len(s.entries)} entries for {cl.k} clusters")

    per_cluster = np.empty(cl.k, dtype=np.uint8)
    for e in s.entries:
        if not (0 <= e.cluster_id < cl.k):
            raise InputError(f"entry cluster id {e.cluster_id} out of range")
        if int(cl.labels[e.frame_id]) != e.cluster_id:
            raise InputError(
                f"frame {e.frame_id} is not a member of cluster {e.cluster_id}"
            )
        value = int(sample_labels[e.frame_id])
        if value not in (0, 1):
            raise InputError(f"label for frame {e.frame_id} must be 0 or 1, got {value}")
        per_cluster[e.cluster_id] = value
    return LabelVector(labels=per_cluster[cl.labels])


def evaluate(pred: LabelVector, truth: LabelVector) -> Metrics:
    """Standard confusion counts; zero denominators yield 0 scores."""
    if pred.n != truth.n:
        raise InputError(f"length mismatch: pred {pred.n} vs truth {truth.n}")
    combo = np.bincount(2 * truth.labels.astype(np.int64) + pred.labels, minlength=4)
    tn, fp, fn, tp = (int(c) for c in combo)
    precision = tp / (tp + fp) if tp + fp > 0 else 0.0
    recall = tp / (tp + fn) if tp + fn > 0 else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return Metrics(tp=tp, fp=fp, fn=fn, tn=tn, precision=precision, recall=recall, f1=f1)


def synthesize_stream(
    seed: int,
    n: int,
    segments: int,
    rare_event_rate: float,
    noise_sigma: float,
    dim: int = 8,
    background_states: int = 5,
) -> tuple[FeatureMatrix, LabelVector]:
    """Generate a piecewise-constant stream with rare positive segments.

    Segment boundaries are drawn uniformly at random.  A random subset of
    segments is designated positive until it covers roughly
    ``rare_event_rate`` of the frames; positive segments share one latent
    state whose embedding sits far from the pool of background states, so
    content changes coincide with label changes.  Features are the segment
    embedding plus isotropic Gaussian noise.  Fully deterministic per seed.
    """
    if segments < 1 or n < segments:
        raise InputError(f"need n >= segments >= 1, got n={n}, segments={segments}")
    if not (0.0 <= rare_event_rate <= 1.0):
        raise InputError(f"rare_event_rate must be in [0, 1], got {rare_event_rate}")
    if noise_sigma < 0:
        raise InputError(f"noise_sigma must be >= 0, got {noise_sigma}")
    if dim < 1 or background_states < 1:
        raise InputError("dim and background_states must be >= 1")

    rng = np.random.default_rng(seed)
    if segments > 1:
        cuts = np.sort(rng.choice(np.arange(1, n), size=segments - 1, replace=False))
        edges = np.concatenate([[0], cuts, [n]])
    else:
        edges = np.array([0, n])
    lengths = np.diff(edges)

    positive = np.zeros(segments, dtype=bool)
    if rare_event_rate > 0:
        target = rare_event_rate * n
        covered = 0
        for idx in rng.permutation(segments):
            positive[idx] = True
            covered += lengths[idx]
            if covered >= target:
                break

    pool = rng.normal(0.0, 1.0, size=(background_states, dim))
    event_state = rng.normal(0.0, 1.0, size=dim) + 3.0

    seg_embed = np.empty((segments, dim))
    prev_bg = -1
    for j in range(segments):
        if positive[j]:
            seg_embed[j] = event_state
            continue
        choice = int(rng.integers(background_states))
        if background_states > 1 and choice == prev_bg:
            choice = (choice + 1) % background_states
        seg_embed[j] = pool[choice]
        prev_bg = choice

    frame_seg = np.repeat(np.arange(segments), lengths)
    rows = seg_embed[frame_seg]
    if noise_sigma > 0:
        rows = rows + rng.normal(0.0, noise_sigma, size=(n, dim))
    truth = np.repeat(positive.astype(np.uint8), lengths)
    return (
        FeatureMatrix(rows=rows.astype(np.float32)),
        LabelVector(labels=truth),
    )


def save_label_file(labels: LabelVector, path: str | Path) -> None:
    """One 0/1 per line."""
    Path(path).write_text("\n".join(str(int(v)) for v in labels.labels) + "\n")


def load_label_file(path: str | Path) -> LabelVector:
    values = []
    for ln, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        if line not in ("0", "1"):
            raise FormatError(f"{path}:{ln}: labels must be 0 or 1, got {line!r}")
        values.append(int(line))
    if not values:
        raise FormatError(f"{path}: no labels found")
    return LabelVector(labels=np.array(values, dtype=np.uint8))


def save_sample_labels(sample_labels: Mapping[int, int], path: str | Path) -> None:
    """frame_id,label lines, ordered by frame id."""
    lines = [f"{fid},{int(sample_labels[fid])}" for fid in sorted(sample_labels)]
    Path(path).write_text("\n".join(lines) + "\n")


def load_sample_labels(path: str | Path) -> dict[int, int]:
    out: dict[int, int] = {}
    for ln, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise FormatError(f"{path}:{ln}: expected frame_id,label")
        try:
            fid, value = int(parts[0]), int(parts[1])
        except ValueError as exc:
            raise FormatError(f"{path}:{ln}: non-integer field") from exc
        if value not in (0, 1):
            raise FormatError(f"{path}:{ln}: label must be 0 or 1")
        if fid in out:
            raise FormatError(f"{path}:{ln}: duplicate frame id {fid}")
        out[fid] = value
    if not out:
        raise FormatError(f"{path}: no sample labels found")
    return out
