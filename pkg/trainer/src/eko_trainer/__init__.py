"""Iterative feature-extractor fine-tuning against the eko clustering core."""

from .core_bridge import cluster_representatives, read_ekf, write_ekf
from .loop import (
    TrainState,
    export_features,
    frames_to_tensor,
    load_frame_dir,
    representative_loss,
    train,
)
from .network import FeatureNetwork

__version__ = "0.1.0"
