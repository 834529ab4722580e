"""Keyframe sampling, storage and label propagation engine for video analytics."""

from .clustering import (
    ClusterStats,
    Clustering,
    Connectivity,
    Dendrogram,
    Merge,
    agglomerate,
    cluster_stats,
    cut,
    default_k_grid,
    load_dendrogram_file,
    optimal_k,
    silhouette_score,
    write_dendrogram_file,
)
from .errors import CorruptionError, EkoError, FormatError, InputError, UnknownFrameError
from .features import (
    FeatureMatrix,
    append_temporal_channel,
    extract_pixel_features,
    l2_normalize,
    load_feature_file,
    write_feature_file,
)
from .frames import (
    FramePayload,
    FrameSequence,
    load_frame_dir,
    load_frames,
    load_raw_stream,
    save_raw_stream,
)
from .propagation import (
    LabelVector,
    Metrics,
    evaluate,
    load_label_file,
    propagate,
    save_label_file,
    synthesize_stream,
)
from .sampling import (
    Policy,
    SampleEntry,
    SampleSet,
    clustering_from_sample_set,
    gop_baseline,
    load_sample_manifest,
    samples_for_budget,
    select_frames,
    uniform_baseline,
    write_sample_manifest,
)
from .storage import (
    KeyframeManifest,
    StoreHandle,
    emit_manifest,
    encode_store,
    label_sidecar,
    load_label_sidecar,
    load_manifest,
    open_store,
    read_frames,
    render_transcode_args,
    save_manifest,
)

__version__ = "0.1.0"
