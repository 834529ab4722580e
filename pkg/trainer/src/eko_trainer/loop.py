"""Iterative fine-tuning against the core's cluster assignments.

Each iteration: export current features, let the core cluster and sample
them, then pull every frame's embedding toward its cluster representative's
embedding (held constant within the iteration) with one Adam step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .core_bridge import cluster_representatives, write_ekf
from .network import FeatureNetwork


@dataclass
class TrainState:
    """Progress of one training run."""

    iteration: int = 0
    losses: list[float] = field(default_factory=list)
    rep_of_frame: np.ndarray | None = None


def frames_to_tensor(frames: np.ndarray) -> torch.Tensor:
    """(n, h, w, c) uint8 -> (n, c, h, w) float32 in [0, 1]."""
    if frames.ndim != 4:
        raise ValueError(f"expected (n, h, w, c) frames, got shape {frames.shape}")
    return torch.from_numpy(frames.astype(np.float32) / 255.0).permute(0, 3, 1, 2)


def load_frame_dir(path: str | Path) -> np.ndarray:
    """Directory of numbered images -> (n, h, w, 3) uint8."""
    from PIL import Image

    root = Path(path)
    suffixes = {".png", ".jpg", ".jpeg", ".bmp"}

    def order(p: Path):
        digits = "".join(ch for ch in p.stem if ch.isdigit())
        return (0, int(digits), p.stem) if digits else (1, 0, p.stem)

    files = sorted((p for p in root.iterdir() if p.suffix.lower() in suffixes), key=order)
    if not files:
        raise ValueError(f"no image files in {root}")
    arrays = [np.asarray(Image.open(p).convert("RGB"), dtype=np.uint8) for p in files]
    shapes = {a.shape for a in arrays}
    if len(shapes) != 1:
        raise ValueError(f"frames differ in size: {sorted(shapes)}")
    return np.stack(arrays)


@torch.no_grad()
def export_features(network: FeatureNetwork, frames: torch.Tensor) -> np.ndarray:
    """Deterministic eval-mode embedding of every frame."""
    network.eval()
    out = network(frames).cpu().numpy().astype(np.float32)
    if not np.isfinite(out).all():
        raise RuntimeError("network produced non-finite features")
    return out


def representative_loss(
    features: torch.Tensor, targets: torch.Tensor
) -> torch.Tensor:
    """Sum of squared distances between each embedding and its target."""
    return ((features - targets) ** 2).sum()


def train(
    frames: np.ndarray,
    n_clusters: int,
    iters: int = 100,
    lr: float = 1e-4,
    dim: int = 64,
    freeze_backbone: bool = True,
    seed: int = 0,
    out_path: str | Path = "features.ekf",
    workdir: str | Path = "train_work",
) -> TrainState:
    """Run the fine-tuning loop and write the final features as .ekf.

    The cluster assignment is recomputed through the core CLI every
    iteration; representatives act as constants inside the loss, so frames
    that are their own representative contribute exactly zero.
    """
    if n_clusters < 1:
        raise ValueError(f"n_clusters must be >= 1, got {n_clusters}")
    if iters < 1:
        raise ValueError(f"iters must be >= 1, got {iters}")
    if n_clusters > frames.shape[0]:
        raise ValueError(
            f"n_clusters {n_clusters} exceeds frame count {frames.shape[0]}"
        )

    batch = frames_to_tensor(frames)
    network = FeatureNetwork(
        dim=dim, channels=batch.shape[1], freeze_backbone=freeze_backbone, seed=seed
    )
    optimizer = torch.optim.Adam(network.trainable_parameters(), lr=lr)
    state = TrainState()

    for iteration in range(iters):
        current = export_features(network, batch)
        rep_of_frame = cluster_representatives(current, n_clusters, workdir)

        network.train()
        features = network(batch)
        targets = features[torch.from_numpy(rep_of_frame)].detach()
        loss = representative_loss(features, targets)
        value = float(loss.item())
        if not math.isfinite(value):
            raise RuntimeError(f"loss diverged at iteration {iteration}: {value}")

        optimizer.zero_grad()
        loss.backward()
        optimizer.step()

        state.iteration = iteration + 1
        state.losses.append(value)
        state.rep_of_frame = rep_of_frame

    write_ekf(export_features(network, batch), out_path)
    return state
