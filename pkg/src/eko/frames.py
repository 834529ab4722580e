"""Decoded frame containers and ingestion from image directories or raw streams."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError, InputError

_IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg", ".bmp", ".gif", ".tif", ".tiff"}


@dataclass(frozen=True)
class FramePayload:
    """One decoded frame: a 0-based id and its row-major pixel bytes."""

    frame_id: int
    pixels: bytes


@dataclass(frozen=True)
class FrameSequence:
    """An ordered run of equally-sized frames; the frame index is the timeline.

    ``frame_rate`` is carried as metadata only; nothing in the engine depends
    on wall-clock timestamps.
    """

    frames: tuple[FramePayload, ...]
    width: int
    height: int
    channels: int
    frame_rate: float = 0.0

    def __post_init__(self):
        if self.channels not in (1, 3):
            raise InputError(f"channels must be 1 or 3, got {self.channels}")
        if self.width < 1 or self.height < 1:
            raise InputError("frame dimensions must be positive")
        if len(self.frames) < 1:
            raise InputError("a frame sequence needs at least one frame")
        expected = self.width * self.height * self.channels
        for i, frame in enumerate(self.frames):
            if frame.frame_id != i:
                raise InputError(
                    f"frame ids must be 0..n-1 in order, got {frame.frame_id} at position {i}"
                )
            if len(frame.pixels) != expected:
                raise InputError(
                    f"frame {i} has {len(frame.pixels)} pixel bytes, expected {expected}"
                )

    @property
    def n(self) -> int:
        return len(self.frames)

    @property
    def frame_bytes(self) -> int:
        return self.width * self.height * self.channels

    def pixel_array(self, frame_id: int) -> np.ndarray:
        """Frame pixels as a (height, width, channels) uint8 array."""
        raw = np.frombuffer(self.frames[frame_id].pixels, dtype=np.uint8)
        return raw.reshape(self.height, self.width, self.channels)


def _numeric_sort_key(path: Path):
    stem = path.stem
    digits = "".join(ch for ch in stem if ch.isdigit())
    return (0, int(digits), stem) if digits else (1, 0, stem)


def load_frame_dir(path: str | Path) -> FrameSequence:
    """Load a directory of numbered image files as a frame sequence.

    Images are sorted by the numeric part of their filename.  If every image
    is single-channel it is kept as grayscale, otherwise everything is
    converted to RGB.
    """
    from PIL import Image

    root = Path(path)
    if not root.is_dir():
        raise InputError(f"not a directory: {root}")
    files = sorted(
        (p for p in root.iterdir() if p.suffix.lower() in _IMAGE_SUFFIXES),
        key=_numeric_sort_key,
    )
    if not files:
        raise InputError(f"no image files found in {root}")

    images = [Image.open(p) for p in files]
    grayscale = all(im.mode == "L" for im in images)
    mode = "L" if grayscale else "RGB"
    channels = 1 if grayscale else 3

    first = images[0]
    width, height = first.size
    frames = []
    for i, im in enumerate(images):
        if im.size != (width, height):
            raise InputError(
                f"frame {i} is {im.size[0]}x{im.size[1]}, expected {width}x{height}"
            )
        arr = np.asarray(im.convert(mode), dtype=np.uint8)
        frames.append(FramePayload(frame_id=i, pixels=arr.tobytes()))
    return FrameSequence(frames=tuple(frames), width=width, height=height, channels=channels)


def _parse_meta(meta_path: Path) -> dict[str, str]:
    values: dict[str, str] = {}
    for line in meta_path.read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise FormatError(f"bad metadata line in {meta_path}: {line!r}")
        key, _, value = line.partition("=")
        values[key.strip()] = value.strip()
    return values


def load_raw_stream(data_path: str | Path, meta_path: str | Path | None = None) -> FrameSequence:
    """Load a raw planar pixel stream described by a key=value sidecar file.

    The sidecar (``<data>.meta`` by default) must define ``width``, ``height``,
    ``channels`` and ``count``; ``frame_rate`` is optional.  Each frame in the
    stream is stored as ``channels`` planes of ``height*width`` bytes and is
    converted to interleaved row-major order on load.
    """
    data_path = Path(data_path)
    meta_path = Path(meta_path) if meta_path is not None else data_path.with_suffix(
        data_path.suffix + ".meta"
    )
    if not meta_path.exists():
        raise InputError(f"missing metadata sidecar {meta_path}")
    meta = _parse_meta(meta_path)
    try:
        width = int(meta["width"])
        height = int(meta["height"])
        channels = int(meta["channels"])
        count = int(meta["count"])
    except KeyError as exc:
        raise FormatError(f"metadata {meta_path} is missing key {exc}") from exc
    except ValueError as exc:
        raise FormatError(f"metadata {meta_path} has a non-integer value: {exc}") from exc
    frame_rate = float(meta.get("frame_rate", 0.0))

    data = data_path.read_bytes()
    expected = width * height * channels * count
    if len(data) != expected:
        raise FormatError(
            f"{data_path} holds {len(data)} bytes, metadata implies {expected}"
        )
    arr = np.frombuffer(data, dtype=np.uint8).reshape(count, channels, height, width)
    interleaved = arr.transpose(0, 2, 3, 1)
    frames = tuple(
        FramePayload(frame_id=i, pixels=interleaved[i].tobytes()) for i in range(count)
    )
    return FrameSequence(
        frames=frames, width=width, height=height, channels=channels, frame_rate=frame_rate
    )


def save_raw_stream(seq: FrameSequence, data_path: str | Path) -> None:
    """Write a frame sequence as a raw planar stream plus its metadata sidecar."""
    data_path = Path(data_path)
    with open(data_path, "wb") as fh:
        for frame in seq.frames:
            arr = np.frombuffer(frame.pixels, dtype=np.uint8)
            planar = arr.reshape(seq.height, seq.width, seq.channels).transpose(2, 0, 1)
            fh.write(planar.tobytes())
    meta_path = data_path.with_suffix(data_path.suffix + ".meta")
    meta_path.write_text(
        f"width={seq.width}\nheight={seq.height}\nchannels={seq.channels}\n"
        f"count={seq.n}\nframe_rate={seq.frame_rate}\n"
    )


def load_frames(path: str | Path) -> FrameSequence:
    """Dispatch: a directory loads as numbered images, a file as a raw stream."""
    p = Path(path)
    if p.is_dir():
        return load_frame_dir(p)
    if p.is_file():
        return load_raw_stream(p)
    raise InputError(f"no such frame input: {p}")
