"""Representative-frame selection, dynamic sample budgets, and baseline samplers."""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .clustering import Clustering, Dendrogram, cut
from .errors import FormatError, InputError
from .features import FeatureMatrix


class Policy(enum.Enum):
    """How the representative frame of a cluster is chosen."""

    FIRST = "first"
    MEAN = "mean"
    MIDDLE = "middle"

    @classmethod
    def parse(cls, text: str) -> "Policy":
        try:
            return cls(text.strip().lower())
        except ValueError:
            raise InputError(f"unknown policy {text!r}") from None


@dataclass(frozen=True)
class SampleEntry:
    """One sampled frame with its cluster id and the cluster's frame interval."""

    frame_id: int
    cluster_id: int
    cluster_start: int
    cluster_end: int


@dataclass(frozen=True)
class SampleSet:
    """The selected frames, one per cluster, ordered by frame id.

    ``clustering`` is a runtime-only copy of the source clustering with the
    representative map filled in; it is not serialized.
    """

    entries: tuple[SampleEntry, ...]
    policy: Policy
    budget: int
    clustering: Clustering | None = None

    def __post_init__(self):
        if not self.entries:
            raise InputError("a sample set needs at least one entry")
        if self.budget < 1:
            raise InputError(f"budget must be >= 1, got {self.budget}")
        seen_clusters = set()
        prev = -1
        for e in self.entries:
            if e.frame_id <= prev:
                raise InputError("sample frame ids must be strictly increasing")
            prev = e.frame_id
            if e.cluster_id in seen_clusters:
                raise InputError(f"cluster {e.cluster_id} sampled twice")
            seen_clusters.add(e.cluster_id)
            if not (e.cluster_start <= e.frame_id <= e.cluster_end):
                raise InputError(
                    f"frame {e.frame_id} outside its cluster interval "
                    f"[{e.cluster_start}, {e.cluster_end}]"
                )

    @property
    def frame_ids(self) -> tuple[int, ...]:
        return tuple(e.frame_id for e in self.entries)

    @property
    def k(self) -> int:
        return len(self.entries)


def _pick(members: np.ndarray, X: np.ndarray, policy: Policy) -> int:
    if policy is Policy.FIRST:
        return int(members[0])
    if policy is Policy.MIDDLE:
        return int(members[(len(members) - 1) // 2])
    centroid = X[members].mean(axis=0)
    deltas = X[members] - centroid
    # argmin returns the first minimum, i.e. the smallest frame id on ties
    return int(members[np.argmin(np.einsum("ij,ij->i", deltas, deltas))])


def select_frames(cl: Clustering, f: FeatureMatrix, p: Policy) -> SampleSet:
    """Pick one representative per cluster.

    FIRST takes the earliest member, MIDDLE the lower temporal median, MEAN
    the member closest to the cluster's feature centroid.  The returned set
    carries a copy of the clustering with the representative map filled.
    """
    if f.n != cl.n:
        raise InputError(f"features have {f.n} rows but clustering covers {cl.n} frames")
    members = cl.cluster_members()
    X = f.rows.astype(np.float64)
    reps = np.array([_pick(m, X, p) for m in members], dtype=np.int64)
    order = np.argsort(reps)
    entries = tuple(
        SampleEntry(
            frame_id=int(reps[cid]),
            cluster_id=int(cid),
            cluster_start=int(members[cid][0]),
            cluster_end=int(members[cid][-1]),
        )
        for cid in order
    )
    filled = replace(cl, representative=reps)
    return SampleSet(entries=entries, policy=p, budget=cl.k, clustering=filled)


def samples_for_budget(d: Dendrogram, f: FeatureMatrix, m: int, p: Policy) -> SampleSet:
    """Cut the cached tree at k = m clusters and select one frame from each."""
    if not (1 <= m <= d.n):
        raise InputError(f"budget must be in [1, {d.n}], got {m}")
    return select_frames(cut(d, m), f, p)


def _interval_clustering(bounds: list[tuple[int, int]], n: int, reps: list[int]) -> Clustering:
    labels = np.empty(n, dtype=np.int64)
    for cid, (start, end) in enumerate(bounds):
        labels[start : end + 1] = cid
    return Clustering(n=n, k=len(bounds), labels=labels, representative=np.array(reps))


def uniform_baseline(n: int, m: int) -> SampleSet:
    """Evenly spaced picks floor(i*n/m); clusters are their temporal Voronoi cells.

    A frame exactly midway between two picks joins the earlier pick's cell.
    """
    if not (1 <= m <= n):
        raise InputError(f"m must be in [1, {n}], got {m}")
    picks = sorted({i * n // m for i in range(m)})
    bounds = []
    start = 0
    for j, p in enumerate(picks):
        end = (p + picks[j + 1]) // 2 if j + 1 < len(picks) else n - 1
        bounds.append((start, end))
        start = end + 1
    entries = tuple(
        SampleEntry(frame_id=p, cluster_id=j, cluster_start=b[0], cluster_end=b[1])
        for j, (p, b) in enumerate(zip(picks, bounds))
    )
    cl = _interval_clustering(bounds, n, picks)
    return SampleSet(entries=entries, policy=Policy.FIRST, budget=m, clustering=cl)


def gop_baseline(n: int, gop_size: int) -> SampleSet:
    """Fixed groups of gop_size frames, each represented by its first frame."""
    if n < 1:
        raise InputError(f"n must be >= 1, got {n}")
    if gop_size < 1:
        raise InputError(f"gop_size must be >= 1, got {gop_size}")
    picks = list(range(0, n, gop_size))
    bounds = [(p, min(p + gop_size, n) - 1) for p in picks]
    entries = tuple(
        SampleEntry(frame_id=p, cluster_id=j, cluster_start=b[0], cluster_end=b[1])
        for j, (p, b) in enumerate(zip(picks, bounds))
    )
    cl = _interval_clustering(bounds, n, picks)
    return SampleSet(entries=entries, policy=Policy.FIRST, budget=len(picks), clustering=cl)


def write_sample_manifest(s: SampleSet, path: str | Path) -> None:
    """Text manifest: a policy/budget header then frame_id,cluster_start,cluster_end lines."""
    lines = [f"policy={s.policy.value} budget={s.budget}"]
    lines.extend(f"{e.frame_id},{e.cluster_start},{e.cluster_end}" for e in s.entries)
    Path(path).write_text("\n".join(lines) + "\n")


def load_sample_manifest(path: str | Path) -> SampleSet:
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise FormatError(f"{path}: empty manifest")
    header = dict(
        token.split("=", 1) for token in lines[0].split() if "=" in token
    )
    if "policy" not in header or "budget" not in header:
        raise FormatError(f"{path}: header must carry policy= and budget=")
    try:
        policy = Policy.parse(header["policy"])
        budget = int(header["budget"])
    except (InputError, ValueError) as exc:
        raise FormatError(f"{path}: bad header: {exc}") from exc

    raw = []
    for ln, line in enumerate(lines[1:], start=2):
        line = line.strip()
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != 3:
            raise FormatError(f"{path}:{ln}: expected frame,start,end")
        try:
            raw.append(tuple(int(p) for p in parts))
        except ValueError as exc:
            raise FormatError(f"{path}:{ln}: non-integer field") from exc
    if not raw:
        raise FormatError(f"{path}: manifest has no entries")
    # cluster ids rank by interval start, matching the temporal relabelling
    start_order = sorted(range(len(raw)), key=lambda i: raw[i][1])
    cluster_of = {i: rank for rank, i in enumerate(start_order)}
    try:
        entries = tuple(
            SampleEntry(frame_id=f, cluster_id=cluster_of[i], cluster_start=s, cluster_end=e)
            for i, (f, s, e) in enumerate(raw)
        )
        return SampleSet(entries=entries, policy=policy, budget=budget)
    except InputError as exc:
        raise FormatError(f"{path}: {exc}") from exc


def clustering_from_sample_set(s: SampleSet) -> Clustering:
    """Rebuild the interval clustering a manifest describes.

    Requires the entry intervals to partition 0..n-1 (true for tight
    clusterings and both baselines).
    """
    if s.clustering is not None:
        return s.clustering
    by_start = sorted(s.entries, key=lambda e: e.cluster_start)
    if by_start[0].cluster_start != 0:
        raise InputError("cluster intervals must start at frame 0")
    for prev, cur in zip(by_start, by_start[1:]):
        if cur.cluster_start != prev.cluster_end + 1:
            raise InputError(
                f"cluster intervals must abut: [{prev.cluster_start},{prev.cluster_end}] "
                f"then [{cur.cluster_start},{cur.cluster_end}]"
            )
    n = by_start[-1].cluster_end + 1
    bounds = [(e.cluster_start, e.cluster_end) for e in by_start]
    reps = [e.frame_id for e in by_start]
    return _interval_clustering(bounds, n, reps)
