"""The trainable feature extractor: a frozen conv backbone plus a projection head."""

from __future__ import annotations

import torch
from torch import nn

BACKBONE_WIDTH = 256  # 16 channels x 4 x 4 after pooling


class FeatureNetwork(nn.Module):
    """Convolutional embedding with a trainable reduction to `dim` outputs.

    The backbone is deterministically initialized from `seed` and frozen by
    default; only the projection learns unless `freeze_backbone=False`.
    """

    def __init__(
        self,
        dim: int = 64,
        channels: int = 3,
        freeze_backbone: bool = True,
        seed: int = 0,
    ):
        super().__init__()
        if dim < 1:
            raise ValueError(f"dim must be >= 1, got {dim}")
        torch.manual_seed(seed)
        self.dim = dim
        self.backbone = nn.Sequential(
            nn.Conv2d(channels, 8, kernel_size=3, stride=2, padding=1),
            nn.ReLU(),
            nn.Conv2d(8, 16, kernel_size=3, stride=2, padding=1),
            nn.ReLU(),
            nn.AdaptiveAvgPool2d(4),
            nn.Flatten(),
        )
        self.projection = nn.Linear(BACKBONE_WIDTH, dim)
        self.frozen_backbone = freeze_backbone
        if freeze_backbone:
            for p in self.backbone.parameters():
                p.requires_grad_(False)

    def forward(self, frames: torch.Tensor) -> torch.Tensor:
        """frames: (batch, channels, height, width) in [0, 1] -> (batch, dim)."""
        return self.projection(self.backbone(frames))

    def trainable_parameters(self):
        return [p for p in self.parameters() if p.requires_grad]
