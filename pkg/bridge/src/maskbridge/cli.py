"""bridge CLI: turn a clip into candidate and track NDJSON.

`bridge candidates` runs the mask generator and prompt scorer on every
sampled frame; `bridge tracks` propagates each emitted candidate through
the clip. Outputs match the alignment toolchain's wire formats exactly.
"""

from __future__ import annotations

import argparse
import sys

from .backends import default_backend
from .emit import PromptError, emit_candidates, emit_tracks, load_prompts
from .frames import VideoError, load_clip


def cmd_candidates(args) -> int:
    clip = load_clip(args.video)
    prompts = load_prompts(args.prompts)
    generator, scorer, _ = default_backend(device=args.device)
    with open(args.out, "w", encoding="utf-8") as fh:
        written = emit_candidates(
            clip, prompts, args.stride, fh, generator=generator, scorer=scorer
        )
    print(f"bridge: {written} candidates from {len(clip)} frames -> {args.out}")
    return 0


def cmd_tracks(args) -> int:
    clip = load_clip(args.video)
    _, _, propagator = default_backend(device=args.device)
    with open(args.out, "w", encoding="utf-8") as fh:
        written = emit_tracks(clip, args.candidates, fh, propagator=propagator)
    print(f"bridge: {written} track rows -> {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bridge",
        description="Adapt a clip and segmentation models to candidate/track NDJSON.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_c = sub.add_parser("candidates", help="masks + prompt scores at sampled frames")
    p_c.add_argument("--video", required=True, help="frame directory or .npy stack")
    p_c.add_argument("--prompts", required=True, help="one prompt per line; first is the target label")
    p_c.add_argument("--stride", type=int, default=30)
    p_c.add_argument("--device", default="cpu", help="forwarded to model backends")
    p_c.add_argument("--out", required=True)
    p_c.set_defaults(func=cmd_candidates)

    p_t = sub.add_parser("tracks", help="propagate each candidate through the clip")
    p_t.add_argument("--video", required=True)
    p_t.add_argument("--candidates", required=True)
    p_t.add_argument("--device", default="cpu", help="forwarded to model backends")
    p_t.add_argument("--out", required=True)
    p_t.set_defaults(func=cmd_tracks)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (VideoError, PromptError, ValueError, FileNotFoundError) as exc:
        print(f"bridge: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
