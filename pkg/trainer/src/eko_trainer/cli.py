"""eko-train entry point."""

from __future__ import annotations

import argparse
import sys

from .loop import load_frame_dir, train


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="eko-train",
        description="Fine-tune a feature extractor against the eko clustering core.",
    )
    parser.add_argument("--frames", required=True, help="directory of numbered images")
    parser.add_argument("--n-clusters", type=int, required=True)
    parser.add_argument("--iters", type=int, default=100)
    parser.add_argument("--lr", type=float, default=1e-4)
    parser.add_argument("--dim", type=int, default=64)
    parser.add_argument(
        "--freeze-backbone",
        action=argparse.BooleanOptionalAction,
        default=True,
        help="train only the projection head (default) or the whole network",
    )
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--workdir", default="train_work")
    parser.add_argument("--out", required=True, help="output .ekf feature file")
    args = parser.parse_args(argv)

    try:
        frames = load_frame_dir(args.frames)
        state = train(
            frames,
            n_clusters=args.n_clusters,
            iters=args.iters,
            lr=args.lr,
            dim=args.dim,
            freeze_backbone=args.freeze_backbone,
            seed=args.seed,
            out_path=args.out,
            workdir=args.workdir,
        )
    except (ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    first, last = state.losses[0], state.losses[-1]
    print(f"trained {state.iteration} iterations: loss {first:.4f} -> {last:.4f}")
    print(f"features -> {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
