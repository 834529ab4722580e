"""Command-line orchestration of the offline and online pipeline stages."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import bench as bench_mod
from .clustering import (
    Connectivity,
    agglomerate,
    cluster_stats,
    cut,
    load_dendrogram_file,
    optimal_k,
    write_dendrogram_file,
)
from .errors import EkoError, InputError
from .features import (
    append_temporal_channel,
    extract_pixel_features,
    l2_normalize,
    load_feature_file,
    write_feature_file,
)
from .frames import load_frames
from .propagation import (
    evaluate,
    load_label_file,
    load_sample_labels,
    propagate,
    save_label_file,
    synthesize_stream,
)
from .sampling import (
    Policy,
    clustering_from_sample_set,
    load_sample_manifest,
    samples_for_budget,
    write_sample_manifest,
)
from .storage import (
    emit_manifest,
    encode_store,
    label_sidecar,
    open_store,
    render_transcode_args,
    save_manifest,
)


def _load_features(args):
    f = load_feature_file(args.features)
    if getattr(args, "l2_normalize", False):
        f = l2_normalize(f)
    return f


def cmd_extract(args) -> int:
    seq = load_frames(args.input)
    f = extract_pixel_features(
        seq, grid=args.grid, grayscale=not args.color, workers=args.threads
    )
    if not args.no_temporal:
        f = append_temporal_channel(f, args.temporal_weight)
    write_feature_file(f, args.out)
    print(f"extracted n={f.n} d={f.d} -> {args.out}")
    return 0


def cmd_cluster(args) -> int:
    f = _load_features(args)
    constraint = Connectivity.parse(args.constraint)
    dendrogram = agglomerate(f, constraint)
    write_dendrogram_file(dendrogram, args.out)
    print(f"clustered n={dendrogram.n} constraint={constraint.kind} -> {args.out}")
    return 0


def cmd_sample(args) -> int:
    f = _load_features(args)
    dendrogram = load_dendrogram_file(args.dendrogram)
    if dendrogram.n != f.n:
        raise InputError(
            f"--dendrogram covers {dendrogram.n} frames but --features has {f.n}"
        )
    policy = Policy.parse(args.policy)
    if args.budget is not None:
        budget = args.budget
    else:
        grid = [int(v) for v in args.k_grid.split(",")] if args.k_grid else None
        budget = optimal_k(f, dendrogram, k_grid=grid, subsample_cap=args.subsample_cap)
        print(f"auto-k selected k={budget}")
    sample_set = samples_for_budget(dendrogram, f, budget, policy)
    write_sample_manifest(sample_set, args.out)
    print(f"sampled k={sample_set.k} policy={policy.value} -> {args.out}")
    return 0


def cmd_encode(args) -> int:
    seq = load_frames(args.input)
    sample_set = load_sample_manifest(args.samples)
    cl = clustering_from_sample_set(sample_set)
    if cl.n != seq.n:
        raise InputError(f"--samples covers {cl.n} frames but --input has {seq.n}")
    encode_store(seq, sample_set, cl, args.codec, args.out)
    print(f"encoded k={sample_set.k} codec={args.codec} -> {args.out}")
    if args.sidecar:
        label_sidecar(cl, sample_set, args.sidecar)
        print(f"sidecar -> {args.sidecar}")
    if args.manifest:
        manifest = emit_manifest(sample_set, seq.n, source=str(args.input), fps=args.fps)
        save_manifest(manifest, args.manifest)
        print(f"manifest -> {args.manifest}")
        if args.fps > 0:
            print(render_transcode_args(manifest, args.fps))
    return 0


def cmd_decode(args) -> int:
    ids = None
    if args.ids:
        ids = [int(v) for v in args.ids.split(",")]
    with open_store(args.store, mode="mmap" if args.mmap else "stream") as handle:
        if ids is None:
            ids = list(handle.frame_ids)
        payloads = handle.read(ids)
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        for fid, blob in zip(ids, payloads):
            (out_dir / f"frame_{fid:08d}.bin").write_bytes(blob)
        print(f"decoded {len(ids)} frames -> {out_dir}")
        print(f"bytes_read={handle.bytes_read}")
    return 0


def cmd_propagate(args) -> int:
    sample_set = load_sample_manifest(args.samples)
    cl = clustering_from_sample_set(sample_set)
    if args.sample_labels:
        labels = load_sample_labels(args.sample_labels)
    else:
        truth = load_label_file(args.truth)
        if truth.n != cl.n:
            raise InputError(f"--truth has {truth.n} labels but samples cover {cl.n}")
        labels = {fid: int(truth.labels[fid]) for fid in sample_set.frame_ids}
    predicted = propagate(sample_set, cl, labels)
    save_label_file(predicted, args.out)
    print(f"propagated {predicted.n} labels -> {args.out}")
    return 0


def cmd_evaluate(args) -> int:
    pred = load_label_file(args.pred)
    truth = load_label_file(args.truth)
    metrics = evaluate(pred, truth)
    print(metrics.to_text())
    if args.json:
        Path(args.json).write_text(json.dumps(metrics.as_dict(), indent=2) + "\n")
    return 0


def cmd_stats(args) -> int:
    sample_set = load_sample_manifest(args.samples)
    cl = clustering_from_sample_set(sample_set)
    stats = cluster_stats(cl)
    print(f"k={cl.k}")
    print(f"mean={stats.mean:g}")
    print(f"median={stats.median:g}")
    print(f"std={stats.std:.6f}")
    print(f"min={stats.min}")
    print(f"max={stats.max}")
    return 0


def cmd_synth(args) -> int:
    features, truth = synthesize_stream(
        seed=args.seed,
        n=args.n,
        segments=args.segments,
        rare_event_rate=args.rate,
        noise_sigma=args.noise,
        dim=args.dim,
    )
    write_feature_file(features, args.out_features)
    print(f"features n={features.n} d={features.d} -> {args.out_features}")
    if args.out_truth:
        save_label_file(truth, args.out_truth)
        print(f"truth ({int(truth.labels.sum())} positive) -> {args.out_truth}")
    if args.out_frames:
        from .frames import save_raw_stream

        save_raw_stream(bench_mod.frames_from_features(features), args.out_frames)
        print(f"frames -> {args.out_frames}")
    return 0


def cmd_pipeline(args) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    if args.input:
        seq = load_frames(args.input)
        f = extract_pixel_features(
            seq, grid=args.grid, grayscale=not args.color, workers=args.threads
        )
        if not args.no_temporal:
            f = append_temporal_channel(f, args.temporal_weight)
        features_path = out_dir / "features.ekf"
        write_feature_file(f, features_path)
        print(f"extract -> {features_path}")
    else:
        seq = None
        f = load_feature_file(args.features)

    constraint = Connectivity.parse(args.constraint)
    dendrogram = agglomerate(f, constraint)
    dendro_path = out_dir / "dendrogram.ekd"
    write_dendrogram_file(dendrogram, dendro_path)
    print(f"cluster -> {dendro_path}")

    policy = Policy.parse(args.policy)
    if args.budget is not None:
        budget = args.budget
    else:
        budget = optimal_k(f, dendrogram, subsample_cap=args.subsample_cap)
        print(f"auto-k selected k={budget}")
    sample_set = samples_for_budget(dendrogram, f, budget, policy)
    samples_path = out_dir / "samples.txt"
    write_sample_manifest(sample_set, samples_path)
    print(f"sample -> {samples_path}")

    if seq is not None:
        store_path = out_dir / "store.ekv"
        encode_store(seq, sample_set, sample_set.clustering, args.codec, store_path)
        print(f"encode -> {store_path}")
        sidecar_path = out_dir / "sidecar.txt"
        label_sidecar(sample_set.clustering, sample_set, sidecar_path)
        print(f"sidecar -> {sidecar_path}")
        manifest = emit_manifest(
            sample_set, seq.n, source=str(args.input), fps=args.fps
        )
        manifest_path = out_dir / "keyframes.txt"
        save_manifest(manifest, manifest_path)
        print(f"manifest -> {manifest_path}")
    return 0


def cmd_bench(args) -> int:
    if args.features:
        features = load_feature_file(args.features)
        truth = load_label_file(args.truth)
    else:
        features, truth = synthesize_stream(
            seed=args.seed,
            n=args.n,
            segments=args.segments,
            rare_event_rate=args.rate,
            noise_sigma=args.noise,
            dim=args.dim,
        )
    selectivities = [float(v) for v in args.selectivities.split(",")]
    policies = [Policy.parse(v) for v in args.policies.split(",")]
    methods = [v.strip() for v in args.methods.split(",")]
    rows = bench_mod.run_bench(
        features,
        truth,
        selectivities=selectivities,
        policies=policies,
        methods=methods,
        workdir=args.workdir,
        constraint=Connectivity.parse(args.constraint),
        codec=args.codec,
    )
    csv_text = bench_mod.rows_to_csv(rows)
    Path(args.out).write_text(csv_text)
    print(csv_text, end="")
    print(f"# {len(rows)} rows -> {args.out}")
    return 0


def _add_temporal_flags(p):
    p.add_argument("--temporal-weight", type=float, default=1.0,
                   help="weight of the appended temporal channel (default 1.0)")
    p.add_argument("--no-temporal", action="store_true",
                   help="skip the temporal channel entirely")


def _add_synth_flags(p):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n", type=int, default=10000)
    p.add_argument("--segments", type=int, default=50)
    p.add_argument("--rate", type=float, default=0.02)
    p.add_argument("--noise", type=float, default=0.2)
    p.add_argument("--dim", type=int, default=8)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="eko",
        description="Keyframe sampling, storage and label propagation engine.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="pixel-grid features from frames")
    p.add_argument("--input", required=True, help="frame directory or raw stream")
    p.add_argument("--grid", type=int, default=4)
    p.add_argument("--color", action="store_true", help="keep color channels")
    p.add_argument("--threads", type=int, default=None)
    _add_temporal_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("cluster", help="build and cache the constrained merge tree")
    p.add_argument("--features", required=True)
    p.add_argument("--constraint", default="tight", help="tight | medium | loose | span:N")
    p.add_argument("--l2-normalize", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("sample", help="select representative frames from the cached tree")
    p.add_argument("--features", required=True)
    p.add_argument("--dendrogram", required=True)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--budget", type=int)
    group.add_argument("--auto-k", action="store_true")
    p.add_argument("--k-grid", help="comma-separated candidate cluster counts")
    p.add_argument("--subsample-cap", type=int, default=5000)
    p.add_argument("--policy", default="middle", help="first | mean | middle")
    p.add_argument("--l2-normalize", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("encode", help="write the random-access keyframe store")
    p.add_argument("--input", required=True)
    p.add_argument("--samples", required=True)
    p.add_argument("--codec", default="raw", choices=["raw", "lossless"])
    p.add_argument("--out", required=True)
    p.add_argument("--sidecar", help="also write the cluster-interval sidecar")
    p.add_argument("--manifest", help="also write the keyframe manifest")
    p.add_argument("--fps", type=float, default=0.0)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", help="read frames back from a store")
    p.add_argument("--store", required=True)
    p.add_argument("--ids", help="comma-separated frame ids (default: all)")
    p.add_argument("--mmap", action="store_true")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("propagate", help="spread sample labels to every frame")
    p.add_argument("--samples", required=True)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--sample-labels", help="frame_id,label lines")
    group.add_argument("--truth", help="take sample labels from this ground truth")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_propagate)

    p = sub.add_parser("evaluate", help="precision/recall/F1 against ground truth")
    p.add_argument("--pred", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--json", help="also write metrics as JSON")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("stats", help="cluster size statistics of a sample manifest")
    p.add_argument("--samples", required=True)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("synth", help="generate a labeled synthetic stream")
    _add_synth_flags(p)
    p.add_argument("--out-features", required=True)
    p.add_argument("--out-truth")
    p.add_argument("--out-frames", help="also render frames as a raw stream")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("pipeline", help="offline stages: extract, cluster, sample, encode")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--input")
    group.add_argument("--features")
    p.add_argument("--grid", type=int, default=4)
    p.add_argument("--color", action="store_true")
    p.add_argument("--threads", type=int, default=None)
    _add_temporal_flags(p)
    p.add_argument("--constraint", default="tight")
    budget_group = p.add_mutually_exclusive_group(required=True)
    budget_group.add_argument("--budget", type=int)
    budget_group.add_argument("--auto-k", action="store_true")
    p.add_argument("--subsample-cap", type=int, default=5000)
    p.add_argument("--policy", default="middle")
    p.add_argument("--codec", default="raw", choices=["raw", "lossless"])
    p.add_argument("--fps", type=float, default=0.0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("bench", help="methods x policies x selectivities table")
    feature_group = p.add_mutually_exclusive_group()
    feature_group.add_argument("--features")
    p.add_argument("--truth", help="required with --features")
    _add_synth_flags(p)
    p.add_argument("--selectivities", default="0.01,0.001")
    p.add_argument("--policies", default="first,mean,middle")
    p.add_argument("--methods", default="eko,uniform,gop")
    p.add_argument("--constraint", default="tight")
    p.add_argument("--codec", default="raw")
    p.add_argument("--workdir", default="bench_work")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "bench" and args.features and not args.truth:
        parser.error("--features requires --truth")
    try:
        return args.func(args)
    except (EkoError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
