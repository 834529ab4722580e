"""Random-access keyframe container, transcoder manifests, and cluster sidecars.

The .ekv container stores each sampled frame as an independently decodable
blob behind a fixed-size index, so reading any subset touches only the
header, the index, and the requested payload bytes.
"""

from __future__ import annotations

import mmap
import struct
import zlib
from dataclasses import dataclass
from pathlib import Path

from .clustering import Clustering
from .errors import CorruptionError, FormatError, InputError, UnknownFrameError
from .frames import FrameSequence
from .sampling import SampleSet

_EKV_MAGIC = b"EKV1"
_EKV_VERSION = 1
_EKV_HEADER = struct.Struct("<4sHIIB")   # magic, version, n_total, k, codec
_EKV_RECORD = struct.Struct("<IIIQQI")   # frame_id, cstart, cend, offset, len, crc32

_CODEC_RAW = 0
_CODEC_DEFLATE = 1
_CODEC_IDS = {"raw": _CODEC_RAW, "lossless": _CODEC_DEFLATE}
_CODEC_NAMES = {v: k for k, v in _CODEC_IDS.items()}


@dataclass(frozen=True)
class IndexRecord:
    frame_id: int
    cluster_start: int
    cluster_end: int
    offset: int
    length: int
    crc32: int


@dataclass(frozen=True)
class KeyframeManifest:
    """Sampled frame indices exported for an external transcoder."""

    n_total_frames: int
    indices: tuple[int, ...]
    source: str | None = None
    fps: float = 0.0

    def __post_init__(self):
        if not self.indices:
            raise InputError("a keyframe manifest needs at least one index")
        prev = -1
        for idx in self.indices:
            if idx <= prev:
                raise InputError("manifest indices must be strictly increasing")
            prev = idx
        if not (0 <= self.indices[0] and self.indices[-1] < self.n_total_frames):
            raise InputError(
                f"indices must lie in [0, {self.n_total_frames}), got "
                f"{self.indices[0]}..{self.indices[-1]}"
            )


def _validate_partition(s: SampleSet, n_total: int) -> None:
    by_start = sorted(s.entries, key=lambda e: e.cluster_start)
    if by_start[0].cluster_start != 0 or by_start[-1].cluster_end != n_total - 1:
        raise InputError("cluster intervals must cover frames 0..n-1")
    for prev, cur in zip(by_start, by_start[1:]):
        if cur.cluster_start != prev.cluster_end + 1:
            raise InputError("cluster intervals must partition the frame range")


def encode_store(
    seq: FrameSequence,
    s: SampleSet,
    cl: Clustering,
    codec: str,
    path: str | Path,
) -> None:
    """Write header, index and one independently decodable payload per sample."""
    if codec not in _CODEC_IDS:
        raise InputError(f"codec must be one of {sorted(_CODEC_IDS)}, got {codec!r}")
    if cl.n != seq.n:
        raise InputError(f"clustering covers {cl.n} frames but sequence has {seq.n}")
    for e in s.entries:
        if not (0 <= e.frame_id < seq.n):
            raise InputError(f"sampled frame {e.frame_id} not in the sequence")
    _validate_partition(s, seq.n)

    codec_id = _CODEC_IDS[codec]
    payloads = []
    for e in s.entries:
        raw = seq.frames[e.frame_id].pixels
        blob = zlib.compress(raw, 6) if codec_id == _CODEC_DEFLATE else raw
        payloads.append(blob)

    k = len(s.entries)
    offset = _EKV_HEADER.size + k * _EKV_RECORD.size
    records = []
    for e, blob in zip(s.entries, payloads):
        records.append(
            IndexRecord(
                frame_id=e.frame_id,
                cluster_start=e.cluster_start,
                cluster_end=e.cluster_end,
                offset=offset,
                length=len(blob),
                crc32=zlib.crc32(blob),
            )
        )
        offset += len(blob)

    with open(path, "wb") as fh:
        fh.write(_EKV_HEADER.pack(_EKV_MAGIC, _EKV_VERSION, seq.n, k, codec_id))
        for r in records:
            fh.write(
                _EKV_RECORD.pack(
                    r.frame_id, r.cluster_start, r.cluster_end, r.offset, r.length, r.crc32
                )
            )
        for blob in payloads:
            fh.write(blob)


class StoreHandle:
    """Open container with an instrumented reader.

    ``bytes_read`` counts every byte fetched from the file, including the
    header and index read at open time.  ``mode`` selects plain seek/read
    ("stream") or a memory map ("mmap"); both return identical payloads.
    """

    def __init__(self, path: str | Path, mode: str = "stream"):
        if mode not in ("stream", "mmap"):
            raise InputError(f"mode must be 'stream' or 'mmap', got {mode!r}")
        self.path = Path(path)
        self.mode = mode
        self.bytes_read = 0
        self._file = open(self.path, "rb")
        self._mmap = None
        if mode == "mmap":
            self._mmap = mmap.mmap(self._file.fileno(), 0, access=mmap.ACCESS_READ)
        self._load_index()

    def _fetch(self, offset: int, length: int) -> bytes:
        if self._mmap is not None:
            data = self._mmap[offset : offset + length]
        else:
            self._file.seek(offset)
            data = self._file.read(length)
        self.bytes_read += len(data)
        return data

    def _load_index(self):
        header = self._fetch(0, _EKV_HEADER.size)
        if len(header) < _EKV_HEADER.size:
            raise FormatError(f"{self.path}: file shorter than the header")
        magic, version, n_total, k, codec_id = _EKV_HEADER.unpack(header)
        if magic != _EKV_MAGIC:
            raise FormatError(f"{self.path}: bad magic {magic!r}")
        if version != _EKV_VERSION:
            raise FormatError(f"{self.path}: unsupported version {version}")
        if codec_id not in _CODEC_NAMES:
            raise FormatError(f"{self.path}: unknown codec id {codec_id}")
        if k < 1 or n_total < 1:
            raise FormatError(f"{self.path}: empty store (n={n_total}, k={k})")
        self.n_total = n_total
        self.codec = _CODEC_NAMES[codec_id]

        raw_index = self._fetch(_EKV_HEADER.size, k * _EKV_RECORD.size)
        if len(raw_index) != k * _EKV_RECORD.size:
            raise FormatError(f"{self.path}: truncated index")
        records = []
        for i in range(k):
            fields = _EKV_RECORD.unpack_from(raw_index, i * _EKV_RECORD.size)
            records.append(IndexRecord(*fields))

        prev_frame = -1
        prev_end = _EKV_HEADER.size + k * _EKV_RECORD.size
        coverage = 0
        for r in records:
            if r.frame_id <= prev_frame:
                raise FormatError(f"{self.path}: index not sorted by frame id")
            prev_frame = r.frame_id
            if r.offset < prev_end:
                raise FormatError(f"{self.path}: overlapping payloads at frame {r.frame_id}")
            prev_end = r.offset + r.length
            if not (r.cluster_start <= r.frame_id <= r.cluster_end):
                raise FormatError(f"{self.path}: frame {r.frame_id} outside its interval")
            coverage += r.cluster_end - r.cluster_start + 1
        starts = sorted(r.cluster_start for r in records)
        ends = sorted(r.cluster_end for r in records)
        if coverage != n_total or starts[0] != 0 or ends[-1] != n_total - 1:
            raise FormatError(f"{self.path}: cluster intervals do not partition 0..n-1")
        self.index = tuple(records)
        self._by_frame = {r.frame_id: r for r in records}

    @property
    def k(self) -> int:
        return len(self.index)

    @property
    def frame_ids(self) -> tuple[int, ...]:
        return tuple(r.frame_id for r in self.index)

    def read(self, ids) -> list[bytes]:
        """Fetch, verify and decode the payloads for the given frame ids."""
        out = []
        for fid in ids:
            record = self._by_frame.get(fid)
            if record is None:
                raise UnknownFrameError(fid)
            blob = self._fetch(record.offset, record.length)
            if len(blob) != record.length:
                raise FormatError(f"{self.path}: truncated payload for frame {fid}")
            if zlib.crc32(blob) != record.crc32:
                raise CorruptionError(f"{self.path}: checksum mismatch on frame {fid}")
            out.append(zlib.decompress(blob) if self.codec == "lossless" else blob)
        return out

    def close(self):
        if self._mmap is not None:
            self._mmap.close()
            self._mmap = None
        self._file.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False


def open_store(path: str | Path, mode: str = "stream") -> StoreHandle:
    return StoreHandle(path, mode=mode)


def read_frames(h: StoreHandle, ids) -> list[bytes]:
    return h.read(ids)


def emit_manifest(s: SampleSet, n: int, source: str | None = None, fps: float = 0.0) -> KeyframeManifest:
    """Collect the sampled frame indices for an external transcoder."""
    ids = s.frame_ids
    if not ids:
        raise InputError("cannot emit a manifest for an empty sample set")
    if ids[-1] >= n:
        raise InputError(f"sample frame {ids[-1]} outside [0, {n})")
    return KeyframeManifest(n_total_frames=n, indices=ids, source=source, fps=fps)


def save_manifest(m: KeyframeManifest, path: str | Path) -> None:
    header = f"n={m.n_total_frames} fps={m.fps:g}"
    if m.source:
        header += f" source={m.source}"
    lines = [header] + [str(i) for i in m.indices]
    Path(path).write_text("\n".join(lines) + "\n")


def load_manifest(path: str | Path) -> KeyframeManifest:
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise FormatError(f"{path}: empty manifest")
    header = dict(tok.split("=", 1) for tok in lines[0].split() if "=" in tok)
    if "n" not in header:
        raise FormatError(f"{path}: header must carry n=")
    try:
        n = int(header["n"])
        fps = float(header.get("fps", 0.0))
    except ValueError as exc:
        raise FormatError(f"{path}: bad header value: {exc}") from exc
    try:
        indices = tuple(int(line) for line in lines[1:] if line.strip())
    except ValueError as exc:
        raise FormatError(f"{path}: non-integer frame index") from exc
    try:
        return KeyframeManifest(
            n_total_frames=n, indices=indices, source=header.get("source"), fps=fps
        )
    except InputError as exc:
        raise FormatError(f"{path}: {exc}") from exc


def render_transcode_args(
    m: KeyframeManifest,
    fps: float,
    src: str | None = None,
    dst: str = "dst",
) -> str:
    """Forced-keyframe transcode command with timestamps frame/fps at 6 decimals."""
    if fps <= 0:
        raise InputError(f"fps must be > 0, got {fps}")
    stamps = ",".join(f"{idx / fps:.6f}" for idx in m.indices)
    source = src if src is not None else (m.source or "src")
    return f"ffmpeg -i {source} -force_key_frames {stamps} {dst} -y"


def label_sidecar(cl: Clustering, s: SampleSet, path: str | Path) -> None:
    """Write the cluster-interval table used for propagation without re-clustering."""
    if len(s.entries) != cl.k:
        raise InputError(f"sample set has {len(s.entries)} entries for {cl.k} clusters")
    _validate_partition(s, cl.n)
    lines = [f"n={cl.n} k={cl.k}"]
    for e in sorted(s.entries, key=lambda e: e.cluster_start):
        lines.append(f"{e.cluster_id},{e.cluster_start},{e.cluster_end},{e.frame_id}")
    Path(path).write_text("\n".join(lines) + "\n")


def load_label_sidecar(path: str | Path) -> tuple[int, list[tuple[int, int, int, int]]]:
    """Read and validate a sidecar; returns (n, [(cluster, start, end, rep), ...])."""
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise FormatError(f"{path}: empty sidecar")
    header = dict(tok.split("=", 1) for tok in lines[0].split() if "=" in tok)
    try:
        n = int(header["n"])
        k = int(header["k"])
    except (KeyError, ValueError) as exc:
        raise FormatError(f"{path}: header must carry integer n= and k=") from exc
    rows = []
    for ln, line in enumerate(lines[1:], start=2):
        line = line.strip()
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != 4:
            raise FormatError(f"{path}:{ln}: expected cluster,start,end,representative")
        try:
            rows.append(tuple(int(p) for p in parts))
        except ValueError as exc:
            raise FormatError(f"{path}:{ln}: non-integer field") from exc
    if len(rows) != k:
        raise FormatError(f"{path}: header declares {k} clusters, found {len(rows)}")
    rows.sort(key=lambda r: r[1])
    expected_start = 0
    for cid, start, end, rep in rows:
        if start != expected_start:
            raise FormatError(f"{path}: cluster intervals must partition 0..{n - 1}")
        if end < start or not (start <= rep <= end):
            raise FormatError(f"{path}: bad interval or representative for cluster {cid}")
        expected_start = end + 1
    if expected_start != n:
        raise FormatError(f"{path}: cluster intervals must cover 0..{n - 1}")
    return n, rows
