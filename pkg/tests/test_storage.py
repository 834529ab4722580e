"""Keyframe container round trips, selective-read bounds, manifests, sidecars."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eko.clustering import Connectivity, agglomerate
from eko.errors import CorruptionError, FormatError, InputError, UnknownFrameError
from eko.features import FeatureMatrix
from eko.frames import FramePayload, FrameSequence
from eko.propagation import synthesize_stream
from eko.sampling import Policy, gop_baseline, samples_for_budget, uniform_baseline
from eko.storage import (
    KeyframeManifest,
    emit_manifest,
    encode_store,
    label_sidecar,
    load_label_sidecar,
    load_manifest,
    open_store,
    render_transcode_args,
    save_manifest,
)

HEADER_SIZE = 15
RECORD_SIZE = 32


def make_sequence(n, frame_bytes=64, seed=0, constant=False):
    rng = np.random.default_rng(seed)
    frames = []
    for i in range(n):
        if constant:
            pixels = bytes([17]) * frame_bytes
        else:
            pixels = rng.integers(0, 256, size=frame_bytes, dtype=np.uint8).tobytes()
        frames.append(FramePayload(frame_id=i, pixels=pixels))
    return FrameSequence(frames=tuple(frames), width=frame_bytes, height=1, channels=1)


def store_for(tmp_path, n=10, k=2, codec="raw", seed=0, constant=False):
    seq = make_sequence(n, seed=seed, constant=constant)
    ss = uniform_baseline(n, k)
    path = tmp_path / "store.ekv"
    encode_store(seq, ss, ss.clustering, codec, path)
    return seq, ss, path


def test_raw_store_size_arithmetic(tmp_path):
    seq, ss, path = store_for(tmp_path, n=10, k=2)
    assert path.stat().st_size == HEADER_SIZE + 2 * RECORD_SIZE + 2 * seq.frame_bytes


def test_roundtrip_payloads(tmp_path):
    for codec in ("raw", "lossless"):
        seq, ss, _ = store_for(tmp_path, n=12, k=3)
        path = tmp_path / f"{codec}.ekv"
        encode_store(seq, ss, ss.clustering, codec, path)
        with open_store(path) as handle:
            payloads = handle.read(ss.frame_ids)
        for fid, blob in zip(ss.frame_ids, payloads):
            assert blob == seq.frames[fid].pixels


def test_lossless_codec_compresses_constant_frames(tmp_path):
    seq, ss, raw_path = store_for(tmp_path, n=10, k=2, constant=True)
    lossless_path = tmp_path / "small.ekv"
    encode_store(seq, ss, ss.clustering, "lossless", lossless_path)
    assert lossless_path.stat().st_size < raw_path.stat().st_size


def test_read_nothing_touches_only_header_and_index(tmp_path):
    _, ss, path = store_for(tmp_path, n=10, k=2)
    with open_store(path) as handle:
        assert handle.read([]) == []
        assert handle.bytes_read == HEADER_SIZE + 2 * RECORD_SIZE


def test_read_everything_touches_whole_file(tmp_path):
    _, ss, path = store_for(tmp_path, n=10, k=2)
    with open_store(path) as handle:
        handle.read(ss.frame_ids)
        assert handle.bytes_read == path.stat().st_size


def test_selective_read_bound(tmp_path):
    seq = make_sequence(1000, frame_bytes=1024, seed=3)
    ss = uniform_baseline(1000, 50)
    path = tmp_path / "store.ekv"
    encode_store(seq, ss, ss.clustering, "raw", path)
    requested = ss.frame_ids[:5]
    with open_store(path) as handle:
        handle.read(requested)
        bound = HEADER_SIZE + 50 * RECORD_SIZE + 5 * 1024
        assert handle.bytes_read <= bound


@settings(max_examples=25, deadline=None)
@given(data=st.data())
def test_selective_read_bound_property(tmp_path_factory, data):
    tmp_path = tmp_path_factory.mktemp("ekv")
    n = data.draw(st.integers(4, 40))
    k = data.draw(st.integers(1, n))
    seq = make_sequence(n, frame_bytes=32, seed=n)
    ss = uniform_baseline(n, k)
    path = tmp_path / "store.ekv"
    encode_store(seq, ss, ss.clustering, "raw", path)
    subset = data.draw(st.lists(st.sampled_from(ss.frame_ids), unique=True))
    with open_store(path) as handle:
        payloads = handle.read(subset)
        bound = HEADER_SIZE + ss.k * RECORD_SIZE + 32 * len(subset)
        assert handle.bytes_read <= bound
    for fid, blob in zip(subset, payloads):
        assert blob == seq.frames[fid].pixels


def test_mmap_and_stream_agree(tmp_path):
    seq, ss, path = store_for(tmp_path, n=20, k=5, codec="lossless")
    with open_store(path, mode="stream") as a, open_store(path, mode="mmap") as b:
        assert a.read(ss.frame_ids) == b.read(ss.frame_ids)
        assert a.bytes_read == b.bytes_read


def test_unknown_frame_rejected(tmp_path):
    _, ss, path = store_for(tmp_path)
    with open_store(path) as handle:
        with pytest.raises(UnknownFrameError):
            handle.read([999])


def test_any_single_byte_payload_corruption_detected(tmp_path):
    seq, ss, path = store_for(tmp_path, n=6, k=2)
    payload_start = HEADER_SIZE + 2 * RECORD_SIZE
    original = path.read_bytes()
    for offset in range(payload_start, len(original)):
        corrupted = bytearray(original)
        corrupted[offset] ^= 0x01
        path.write_bytes(bytes(corrupted))
        with open_store(path) as handle:
            with pytest.raises(CorruptionError):
                handle.read(ss.frame_ids)
    path.write_bytes(original)


def test_bad_magic_rejected(tmp_path):
    _, _, path = store_for(tmp_path)
    data = bytearray(path.read_bytes())
    data[0] ^= 0xFF
    path.write_bytes(bytes(data))
    with pytest.raises(FormatError):
        open_store(path)


def test_encode_requires_partition(tmp_path):
    seq = make_sequence(10)
    ss = uniform_baseline(8, 2)  # covers 0..7, not 0..9
    with pytest.raises(InputError):
        encode_store(seq, ss, ss.clustering, "raw", tmp_path / "x.ekv")


def test_encode_rejects_unknown_codec(tmp_path):
    seq, ss, _ = store_for(tmp_path)
    with pytest.raises(InputError):
        encode_store(seq, ss, ss.clustering, "h264", tmp_path / "x.ekv")


def test_transcode_args_hand_example():
    m = KeyframeManifest(n_total_frames=600, indices=(0, 250, 500))
    text = render_transcode_args(m, fps=25)
    assert "-force_key_frames 0.000000,10.000000,20.000000" in text
    assert text.startswith("ffmpeg -i ") and text.endswith(" -y")


def test_transcode_args_requires_positive_fps():
    m = KeyframeManifest(n_total_frames=10, indices=(0, 5))
    with pytest.raises(InputError):
        render_transcode_args(m, fps=0)


def test_manifest_roundtrip(tmp_path):
    f, _ = synthesize_stream(seed=4, n=60, segments=3, rare_event_rate=0.0, noise_sigma=0.1)
    dend = agglomerate(f, Connectivity.tight())
    ss = samples_for_budget(dend, f, 5, Policy.MIDDLE)
    manifest = emit_manifest(ss, 60, source="cam0", fps=25.0)
    path = tmp_path / "keys.txt"
    save_manifest(manifest, path)
    loaded = load_manifest(path)
    assert loaded.indices == manifest.indices
    assert loaded.n_total_frames == 60
    assert loaded.source == "cam0"
    assert loaded.fps == 25.0


def test_manifest_rejects_empty():
    with pytest.raises(InputError):
        KeyframeManifest(n_total_frames=10, indices=())


def test_manifest_rejects_out_of_range():
    with pytest.raises(InputError):
        KeyframeManifest(n_total_frames=10, indices=(0, 10))
    with pytest.raises(InputError):
        KeyframeManifest(n_total_frames=10, indices=(3, 3))


def test_sidecar_roundtrip(tmp_path):
    ss = gop_baseline(40, 9)
    path = tmp_path / "sidecar.txt"
    label_sidecar(ss.clustering, ss, path)
    n, rows = load_label_sidecar(path)
    assert n == 40
    assert [(s, e) for _, s, e, _ in rows] == [
        (e.cluster_start, e.cluster_end) for e in ss.entries
    ]
    assert [rep for _, _, _, rep in rows] == list(ss.frame_ids)


def test_sidecar_detects_tampered_overlap(tmp_path):
    ss = gop_baseline(30, 10)
    path = tmp_path / "sidecar.txt"
    label_sidecar(ss.clustering, ss, path)
    lines = path.read_text().splitlines()
    lines[1] = "0,0,12,0"  # now overlaps the second interval
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(FormatError):
        load_label_sidecar(path)
