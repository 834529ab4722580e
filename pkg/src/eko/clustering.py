"""Temporally-constrained Ward agglomeration with a cached, cuttable merge tree.

Two clusters may merge only while the minimum temporal gap between their
member frame indices stays within the connectivity span (span 1 means the
clusters must abut).  Merges are greedy by Ward cost

    cost(A, B) = |A||B| / (|A|+|B|) * ||centroid(A) - centroid(B)||^2

with ties broken by the earlier left-cluster start, then the earlier right
start.  Because the constraint can produce cost inversions, cuts are defined
by merge order rather than by a cost threshold.
"""

from __future__ import annotations

import heapq
import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError, InputError
from .features import FeatureMatrix

_EKD_MAGIC = b"EKD1"
_EKD_HEADER = struct.Struct("<4sIBI")  # magic, n, constraint kind, span
_EKD_RECORD = struct.Struct("<IIdI")   # left, right, cost, size

_KIND_CODES = {"tight": 0, "medium": 1, "loose": 2, "custom": 3}
_KIND_NAMES = {v: k for k, v in _KIND_CODES.items()}
_KIND_SPANS = {"tight": 1, "medium": 50, "loose": 100}


@dataclass(frozen=True)
class Connectivity:
    """Temporal merge constraint: maximum allowed gap between cluster members."""

    kind: str
    span: int

    def __post_init__(self):
        if self.kind not in _KIND_CODES:
            raise InputError(f"unknown connectivity kind {self.kind!r}")
        if self.span < 1:
            raise InputError(f"span must be >= 1, got {self.span}")
        fixed = _KIND_SPANS.get(self.kind)
        if fixed is not None and self.span != fixed:
            raise InputError(f"{self.kind} connectivity has span {fixed}, got {self.span}")

    @classmethod
    def tight(cls) -> "Connectivity":
        return cls("tight", 1)

    @classmethod
    def medium(cls) -> "Connectivity":
        return cls("medium", 50)

    @classmethod
    def loose(cls) -> "Connectivity":
        return cls("loose", 100)

    @classmethod
    def custom(cls, span: int) -> "Connectivity":
        return cls("custom", span)

    @classmethod
    def parse(cls, text: str) -> "Connectivity":
        """Parse 'tight' | 'medium' | 'loose' | 'span:N'."""
        text = text.strip().lower()
        if text in _KIND_SPANS:
            return cls(text, _KIND_SPANS[text])
        if text.startswith("span:"):
            try:
                return cls.custom(int(text[5:]))
            except ValueError as exc:
                raise InputError(f"bad span in constraint {text!r}") from exc
        raise InputError(f"unknown constraint {text!r}")


@dataclass(frozen=True)
class Merge:
    """One agglomeration step; left is the cluster with the earlier start."""

    left: int
    right: int
    cost: float
    new_id: int
    size: int


@dataclass(frozen=True)
class Dendrogram:
    """Cached merge sequence; leaves are ids 0..n-1, merges n..2n-2."""

    n: int
    merges: tuple[Merge, ...]
    constraint: Connectivity

    def __post_init__(self):
        if self.n < 1:
            raise InputError("dendrogram needs n >= 1")
        if len(self.merges) != self.n - 1:
            raise InputError(
                f"expected {self.n - 1} merges for n={self.n}, got {len(self.merges)}"
            )
        consumed: set[int] = set()
        for i, m in enumerate(self.merges):
            if m.new_id != self.n + i:
                raise InputError(f"merge {i} has new_id {m.new_id}, expected {self.n + i}")
            for cid in (m.left, m.right):
                if not (0 <= cid < m.new_id):
                    raise InputError(f"merge {i} references out-of-range cluster {cid}")
                if cid in consumed:
                    raise InputError(f"cluster {cid} consumed twice")
                consumed.add(cid)


@dataclass(frozen=True)
class Clustering:
    """A partition of frames 0..n-1 into k clusters, labelled in temporal order.

    ``representative`` maps cluster id to its sampled frame; it is filled by
    the sampler and stays None straight after a cut.
    """

    n: int
    k: int
    labels: np.ndarray
    representative: np.ndarray | None = None

    def __post_init__(self):
        labels = np.ascontiguousarray(self.labels, dtype=np.int64)
        if labels.shape != (self.n,):
            raise InputError(f"labels must have shape ({self.n},), got {labels.shape}")
        if not (1 <= self.k <= self.n):
            raise InputError(f"k must be in [1, {self.n}], got {self.k}")
        counts = np.bincount(labels, minlength=self.k)
        if labels.min() < 0 or labels.max() >= self.k or (counts == 0).any():
            raise InputError("labels must form a partition into clusters 0..k-1")
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        if self.representative is not None:
            rep = np.ascontiguousarray(self.representative, dtype=np.int64)
            if rep.shape != (self.k,):
                raise InputError(f"representative must have shape ({self.k},)")
            if (labels[rep] != np.arange(self.k)).any():
                raise InputError("each representative must belong to its cluster")
            rep.setflags(write=False)
            object.__setattr__(self, "representative", rep)

    def cluster_members(self) -> list[np.ndarray]:
        """Member frame ids per cluster, ascending within each cluster."""
        order = np.argsort(self.labels, kind="stable")
        counts = np.bincount(self.labels, minlength=self.k)
        return np.split(order, np.cumsum(counts)[:-1])

    def cluster_intervals(self) -> np.ndarray:
        """(k, 2) array of [min member, max member] per cluster."""
        members = self.cluster_members()
        return np.array([[m[0], m[-1]] for m in members], dtype=np.int64)


@dataclass(frozen=True)
class ClusterStats:
    """Summary statistics over cluster sizes."""

    mean: float
    median: float
    std: float
    min: int
    max: int


def _pair_cost(sums: np.ndarray, sizes: np.ndarray, a: int, b: int) -> float:
    diff = sums[a] / sizes[a] - sums[b] / sizes[b]
    w = sizes[a] * sizes[b] / (sizes[a] + sizes[b])
    return float(w * (diff @ diff))


def agglomerate(f: FeatureMatrix, c: Connectivity) -> Dendrogram:
    """Greedy constrained Ward merging of all n frames down to one cluster.

    Uses a candidate heap with lazy invalidation over the cluster connectivity
    graph; under tight connectivity the graph is the adjacency chain and the
    whole run is O(n log n) time, O(n) space.  Wider spans cost O(n * span)
    candidates up front.
    """
    X = f.rows.astype(np.float64)
    n, d = X.shape
    if not np.isfinite(X).all():
        raise InputError("features contain non-finite values")
    span = c.span
    total = 2 * n - 1

    sums = np.zeros((total, d))
    sums[:n] = X
    sizes = np.zeros(total, dtype=np.int64)
    sizes[:n] = 1
    starts = np.zeros(total, dtype=np.int64)
    starts[:n] = np.arange(n)
    alive = np.zeros(total, dtype=bool)
    alive[:n] = True

    # Leaf i is connected to leaves within `span`; merged clusters inherit the
    # union of their parts' neighbors, which is exactly the min-gap rule.
    neighbors: list[set[int]] = [
        set(range(max(0, i - span), i)) | set(range(i + 1, min(n, i + span + 1)))
        for i in range(n)
    ] + [set() for _ in range(n - 1)]

    heap: list[tuple[float, int, int, int, int]] = []
    for delta in range(1, min(span, n - 1) + 1):
        diff = X[delta:] - X[:-delta]
        costs = 0.5 * np.einsum("ij,ij->i", diff, diff)
        heap.extend((costs[i], i, i + delta, i, i + delta) for i in range(n - delta))
    heapq.heapify(heap)

    merges: list[Merge] = []
    for step in range(n - 1):
        while True:
            cost, _, _, a, b = heapq.heappop(heap)
            if alive[a] and alive[b]:
                break
        new = n + step
        left, right = (a, b) if starts[a] <= starts[b] else (b, a)
        merges.append(Merge(left, right, cost, new, int(sizes[a] + sizes[b])))

        alive[a] = alive[b] = False
        alive[new] = True
        sums[new] = sums[a] + sums[b]
        sizes[new] = sizes[a] + sizes[b]
        starts[new] = min(starts[a], starts[b])
        merged = (neighbors[a] | neighbors[b]) - {a, b}
        neighbors[new] = merged
        neighbors[a] = neighbors[b] = set()
        for other in merged:
            nb = neighbors[other]
            nb.discard(a)
            nb.discard(b)
            nb.add(new)
            cst = _pair_cost(sums, sizes, new, other)
            if starts[new] <= starts[other]:
                heapq.heappush(heap, (cst, int(starts[new]), int(starts[other]), new, other))
            else:
                heapq.heappush(heap, (cst, int(starts[other]), int(starts[new]), other, new))

    return Dendrogram(n=n, merges=tuple(merges), constraint=c)


def cut(d: Dendrogram, k: int) -> Clustering:
    """Apply the first n-k merges and relabel the clusters in temporal order."""
    n = d.n
    if not (1 <= k <= n):
        raise InputError(f"k must be in [1, {n}], got {k}")
    total = 2 * n - 1
    parent = np.arange(total)
    for m in d.merges[: n - k]:
        parent[m.left] = m.new_id
        parent[m.right] = m.new_id
    root = np.arange(total)
    for idx in range(total - 1, -1, -1):
        p = parent[idx]
        if p != idx:
            root[idx] = root[p]  # parents have larger ids, so root[p] is final
    uniq, first, inverse = np.unique(root[:n], return_index=True, return_inverse=True)
    order = np.argsort(first, kind="stable")
    rank = np.empty(len(uniq), dtype=np.int64)
    rank[order] = np.arange(len(uniq))
    return Clustering(n=n, k=len(uniq), labels=rank[inverse])


def _silhouette_values(X: np.ndarray, labels: np.ndarray, k: int) -> np.ndarray:
    """Per-point silhouette values, computed in memory-bounded chunks."""
    n = X.shape[0]
    counts = np.bincount(labels, minlength=k).astype(np.float64)
    onehot = np.zeros((n, k))
    onehot[np.arange(n), labels] = 1.0
    sq = np.einsum("ij,ij->i", X, X)
    values = np.empty(n)
    chunk = max(1, (4 << 20) // max(n, 1))  # ~32 MB of f64 distances per block
    for lo in range(0, n, chunk):
        hi = min(n, lo + chunk)
        d2 = sq[lo:hi, None] + sq[None, :] - 2.0 * (X[lo:hi] @ X.T)
        np.maximum(d2, 0.0, out=d2)
        dist = np.sqrt(d2)
        rows = np.arange(hi - lo)
        dist[rows, np.arange(lo, hi)] = 0.0
        per_cluster = dist @ onehot
        own = labels[lo:hi]
        own_counts = counts[own]
        a = np.zeros(hi - lo)
        multi = own_counts > 1
        a[multi] = per_cluster[rows[multi], own[multi]] / (own_counts[multi] - 1)
        mean_to = per_cluster / counts[None, :]
        mean_to[rows, own] = np.inf
        b = mean_to.min(axis=1)
        denom = np.maximum(a, b)
        s = np.zeros(hi - lo)
        ok = multi & (denom > 0)
        s[ok] = (b[ok] - a[ok]) / denom[ok]
        values[lo:hi] = s
    return values


def silhouette_score(f: FeatureMatrix, labels) -> float:
    """Mean silhouette s(i) = (b-a)/max(a,b) with the singleton-cluster s=0 rule."""
    X = f.rows.astype(np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape != (X.shape[0],):
        raise InputError(f"labels must have shape ({X.shape[0]},), got {labels.shape}")
    uniq, inverse = np.unique(labels, return_inverse=True)
    if len(uniq) < 2:
        raise InputError("silhouette needs at least two clusters")
    return float(_silhouette_values(X, inverse, len(uniq)).mean())


def default_k_grid(n: int, points: int = 8) -> list[int]:
    """Geometric grid of candidate cluster counts from ~n/1000 to ~n/10."""
    if n < 2:
        raise InputError("need n >= 2 to pick a cluster count")
    lo = min(max(2, math.ceil(n / 1000)), n)
    hi = min(max(2, math.ceil(n / 10)), n)
    lo = min(lo, hi)
    grid = {min(n, max(2, math.ceil(v))) for v in np.geomspace(lo, hi, num=points)}
    return sorted(grid)


def optimal_k(
    f: FeatureMatrix,
    d: Dendrogram,
    k_grid=None,
    subsample_cap: int = 5000,
) -> int:
    """Pick the candidate k with the best subsampled silhouette; ties take the smaller k.

    The silhouette is evaluated on every ceil(n/subsample_cap)-th frame, a
    deterministic stratified subsample.  A candidate whose subsample collapses
    to a single cluster scores 0 by convention (so an all-constant stream
    returns the smallest candidate).
    """
    if f.n != d.n:
        raise InputError(f"features have {f.n} rows but dendrogram has {d.n} leaves")
    grid = sorted(set(k_grid)) if k_grid is not None else default_k_grid(f.n)
    if not grid:
        raise InputError("empty k grid")
    for k in grid:
        if not (2 <= k <= f.n):
            raise InputError(f"k grid value {k} outside [2, {f.n}]")
    if subsample_cap < 1:
        raise InputError(f"subsample_cap must be >= 1, got {subsample_cap}")
    step = math.ceil(f.n / subsample_cap)
    sub = np.arange(0, f.n, step)
    X = f.rows[sub].astype(np.float64)

    best_k = grid[0]
    best_score = -math.inf
    for k in grid:
        labels = cut(d, k).labels[sub]
        uniq, inverse = np.unique(labels, return_inverse=True)
        score = 0.0 if len(uniq) < 2 else float(_silhouette_values(X, inverse, len(uniq)).mean())
        if score > best_score:
            best_k, best_score = k, score
    return best_k


def cluster_stats(cl: Clustering) -> ClusterStats:
    """Exact size statistics; the median is the lower middle for even k."""
    sizes = np.bincount(cl.labels, minlength=cl.k)
    ordered = np.sort(sizes)
    return ClusterStats(
        mean=cl.n / cl.k,
        median=float(ordered[(cl.k - 1) // 2]),
        std=float(sizes.std()),
        min=int(ordered[0]),
        max=int(ordered[-1]),
    )


def write_dendrogram_file(d: Dendrogram, path: str | Path) -> None:
    """Write the .ekd cache: header plus one fixed-size record per merge."""
    with open(path, "wb") as fh:
        fh.write(
            _EKD_HEADER.pack(_EKD_MAGIC, d.n, _KIND_CODES[d.constraint.kind], d.constraint.span)
        )
        for m in d.merges:
            fh.write(_EKD_RECORD.pack(m.left, m.right, m.cost, m.size))


def load_dendrogram_file(path: str | Path) -> Dendrogram:
    data = Path(path).read_bytes()
    if len(data) < _EKD_HEADER.size:
        raise FormatError(f"{path}: file shorter than the header")
    magic, n, kind_code, span = _EKD_HEADER.unpack_from(data)
    if magic != _EKD_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if kind_code not in _KIND_NAMES:
        raise FormatError(f"{path}: unknown constraint kind {kind_code}")
    if n < 1:
        raise FormatError(f"{path}: bad leaf count {n}")
    body = data[_EKD_HEADER.size :]
    if len(body) != (n - 1) * _EKD_RECORD.size:
        raise FormatError(
            f"{path}: {len(body)} record bytes, expected {(n - 1) * _EKD_RECORD.size}"
        )
    try:
        constraint = Connectivity(_KIND_NAMES[kind_code], span)
    except InputError as exc:
        raise FormatError(f"{path}: {exc}") from exc

    sizes = np.ones(2 * n - 1, dtype=np.int64)
    merges = []
    for i in range(n - 1):
        left, right, cost, size = _EKD_RECORD.unpack_from(body, i * _EKD_RECORD.size)
        if not math.isfinite(cost):
            raise FormatError(f"{path}: merge {i} has non-finite cost")
        new_id = n + i
        if left >= new_id or right >= new_id:
            raise FormatError(f"{path}: merge {i} references a not-yet-created cluster")
        if sizes[left] + sizes[right] != size:
            raise FormatError(f"{path}: merge {i} size {size} inconsistent with children")
        sizes[new_id] = size
        merges.append(Merge(left, right, cost, new_id, size))
    try:
        return Dendrogram(n=n, merges=tuple(merges), constraint=constraint)
    except InputError as exc:
        raise FormatError(f"{path}: {exc}") from exc
