"""
The random-access keyframe container
====================================

Sampled frames are written as independently decodable blobs behind a fixed
index, so answering a query reads only the bytes it needs.  A keyframe
manifest exports the same sample for an external transcoder.
"""

import numpy as np

from eko import (
    Connectivity,
    FramePayload,
    FrameSequence,
    Policy,
    agglomerate,
    emit_manifest,
    encode_store,
    extract_pixel_features,
    open_store,
    render_transcode_args,
    samples_for_budget,
)

# 2000 frames of 48x48 grayscale; three visually distinct phases
rng = np.random.default_rng(0)
phase_values = (30, 160, 90)
frames = []
for i in range(2000):
    phase = 0 if i < 700 else (1 if i < 1400 else 2)
    img = np.full((48, 48), phase_values[phase], dtype=np.uint8)
    img += rng.integers(0, 8, size=(48, 48), dtype=np.uint8)
    frames.append(FramePayload(frame_id=i, pixels=img.tobytes()))
seq = FrameSequence(frames=tuple(frames), width=48, height=48, channels=1)

features = extract_pixel_features(seq, grid=4)
dendrogram = agglomerate(features, Connectivity.tight())
samples = samples_for_budget(dendrogram, features, 20, Policy.MIDDLE)

encode_store(seq, samples, samples.clustering, "lossless", "demo_store.ekv")
import os

size = os.path.getsize("demo_store.ekv")
raw_size = seq.n * seq.frame_bytes
print(f"store: {size:,} bytes for 20 keyframes "
      f"(full decoded clip would be {raw_size:,})")

# selective decode: only the requested payload bytes are touched
with open_store("demo_store.ekv") as handle:
    handle.read(samples.frame_ids[:2])
    print(f"reading 2 of 20 frames touched {handle.bytes_read:,} bytes "
          f"({handle.bytes_read / size:.1%} of the store)")

with open_store("demo_store.ekv", mode="mmap") as handle:
    blobs = handle.read(samples.frame_ids[:2])
    print(f"mmap mode returns identical payloads: "
          f"{blobs[0] == seq.frames[samples.frame_ids[0]].pixels}")

# the manifest drives an external transcoder instead of the native container
manifest = emit_manifest(samples, seq.n, source="clip.mp4", fps=25.0)
command = render_transcode_args(manifest, fps=25.0, dst="clip_keyed.mp4")
print("\ntranscode command:")
print(" ", command[:96] + " ...")
