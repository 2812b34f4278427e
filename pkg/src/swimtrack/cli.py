"""Command-line pipeline: align, biometrics, synth, eval, split.

Exit codes: 0 success, 2 invalid input (bad schema, bad config; the
offending file and line are named on stderr), 3 completed with warnings
(for example a video with a single sampled interval, where alignment is
impossible by construction).
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field

from . import io as sio
from .alignment import (
    AlignmentConfig,
    AlignmentError,
    FileBackedPropagator,
    PropagationError,
    run_alignment,
)
from .evaluation import EvalError, SplitConfig, precision_recall_at_iou, time_block_split, video_dice
from .kinematics import KinematicsConfig, KinematicsError, estimate_tbf
from .masks import MaskError
from .morphometry import CameraModel, MorphometryError, pixels_to_meters, skeleton_length_px, skeletonize
from .synth import SynthError, generate, oracle_tracks, scene_from_dict

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_WARNINGS = 3

DEFAULT_CAMERA = dict(
    sensor_width_mm=13.2,
    image_width_px=1920.0,
    altitude_m=37.0,
    depth_m=1.5,
    focal_length_mm=28.0,
    fps=30.0,
)

_CONFIG_SECTIONS = {
    "alignment": {
        "interval_stride": int,
        "score_threshold": float,
        "iou_threshold": float,
        "shark_prompt_label": str,
        "min_support": int,
    },
    "kinematics": {
        "savgol_window": int,
        "savgol_order": int,
        "tbf_window_s": float,
        "tbf_step_s": float,
    },
    "camera": {
        "sensor_width_mm": float,
        "image_width_px": float,
        "altitude_m": float,
        "depth_m": float,
        "focal_length_mm": float,
        "fps": float,
    },
    "split": {
        "block_size": int,
        "ratios": tuple,
        "seed": int,
    },
}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    """All tunables for a run; file values first, flags override."""

    alignment: AlignmentConfig = field(default_factory=AlignmentConfig)
    kinematics: KinematicsConfig = field(default_factory=KinematicsConfig)
    camera: CameraModel = field(default_factory=lambda: CameraModel(**DEFAULT_CAMERA))
    split: SplitConfig = field(default_factory=SplitConfig)

    @classmethod
    def load(cls, path=None, overrides: dict | None = None) -> "RunConfig":
        raw: dict = {}
        if path is not None:
            with open(path, "r", encoding="utf-8") as fh:
                try:
                    raw = json.load(fh)
                except json.JSONDecodeError as exc:
                    raise ConfigError(f"{path}:{exc.lineno}: invalid JSON: {exc.msg}")
            if not isinstance(raw, dict):
                raise ConfigError(f"{path}: config must be a JSON object")
        unknown = set(raw) - set(_CONFIG_SECTIONS)
        if unknown:
            raise ConfigError(f"unknown config sections: {sorted(unknown)}")
        merged: dict[str, dict] = {}
        for section, keys in _CONFIG_SECTIONS.items():
            values = dict(raw.get(section, {}))
            bad = set(values) - set(keys)
            if bad:
                raise ConfigError(f"unknown keys in [{section}]: {sorted(bad)}")
            for key, value in (overrides or {}).get(section, {}).items():
                if value is not None:
                    values[key] = value
            merged[section] = values
        try:
            camera_values = dict(DEFAULT_CAMERA)
            camera_values.update(merged["camera"])
            split_values = dict(merged["split"])
            if "ratios" in split_values:
                split_values["ratios"] = tuple(split_values["ratios"])
            return cls(
                alignment=AlignmentConfig(**merged["alignment"]),
                kinematics=KinematicsConfig(**merged["kinematics"]),
                camera=CameraModel(**camera_values),
                split=SplitConfig(**split_values),
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None


def _alignment_overrides(args) -> dict:
    return {
        "alignment": {
            "interval_stride": args.interval_stride,
            "score_threshold": args.score_threshold,
            "iou_threshold": args.iou_threshold,
            "shark_prompt_label": args.shark_label,
            "min_support": args.min_support,
        },
        "kinematics": {
            "savgol_window": getattr(args, "savgol_window", None),
            "savgol_order": getattr(args, "savgol_order", None),
            "tbf_window_s": getattr(args, "tbf_window", None),
            "tbf_step_s": getattr(args, "tbf_step", None),
        },
        "split": {
            "block_size": getattr(args, "block_size", None),
            "seed": getattr(args, "seed", None),
        },
    }


def cmd_align(args) -> int:
    config = RunConfig.load(args.config, _alignment_overrides(args))
    candidates = sio.read_candidates(args.candidates)
    tracks = sio.read_tracks(args.tracks)
    propagator = FileBackedPropagator(tracks)
    if not candidates:
        sio.write_individuals(args.out, [])
        print(f"align: 0 candidates, 0 individuals -> {args.out}")
        return EXIT_OK
    result = run_alignment(
        candidates, propagator, config.alignment, threads=args.threads
    )
    sio.write_individuals(args.out, result.individuals)
    for warning in result.warnings:
        print(f"align: warning: {warning}", file=sys.stderr)
    print(
        f"align: {len(candidates)} candidates, "
        f"{len(result.individuals)} individuals -> {args.out}"
    )
    return EXIT_WARNINGS if result.warnings else EXIT_OK


def cmd_biometrics(args) -> int:
    camera_overrides = {
        "sensor_width_mm": args.sensor_width_mm,
        "image_width_px": args.image_width_px,
        "altitude_m": args.altitude_m,
        "depth_m": args.depth_m,
        "focal_length_mm": args.focal_length_mm,
        "fps": args.fps,
    }
    overrides = {
        "kinematics": {
            "savgol_window": args.savgol_window,
            "savgol_order": args.savgol_order,
            "tbf_window_s": args.tbf_window,
            "tbf_step_s": args.tbf_step,
        },
        "camera": camera_overrides,
    }
    config = RunConfig.load(args.config, overrides)
    if args.camera:
        base = sio.read_camera(args.camera)
        values = {field: getattr(base, field) for field in camera_overrides}
        values.update({k: v for k, v in camera_overrides.items() if v is not None})
        try:
            camera = CameraModel(**values)
        except MorphometryError as exc:
            raise ConfigError(str(exc)) from None
    else:
        camera = config.camera
    individuals = sio.read_individuals(args.individuals)

    length_rows = []
    displacement_rows = []
    tbf_rows = []
    warnings: list[str] = []
    for ind_id in sorted(individuals):
        masks = individuals[ind_id]
        for frame in sorted(masks):
            m = masks[frame]
            if m.is_empty:
                continue
            try:
                px = skeleton_length_px(skeletonize(m), m)
            except (MaskError, MorphometryError) as exc:
                warnings.append(f"length skipped id={ind_id} frame={frame}: {exc}")
                continue
            length_rows.append((frame, ind_id, px, pixels_to_meters(px, camera)))
        try:
            result = estimate_tbf(masks, camera, config.kinematics)
        except KinematicsError as exc:
            warnings.append(f"tbf skipped id={ind_id}: {exc}")
            continue
        warnings.extend(f"id={ind_id}: {w}" for w in result.warnings)
        for frame, raw, smoothed in zip(
            result.displacement.frame_indices,
            result.displacement.values,
            result.smoothed,
        ):
            displacement_rows.append((int(frame), ind_id, raw, smoothed))
        for center, value in zip(result.tbf.window_centers_s, result.tbf.values):
            tbf_rows.append((center, ind_id, value))

    sio.write_lengths_csv(args.lengths_out, length_rows)
    sio.write_displacement_csv(args.displacement_out, displacement_rows)
    sio.write_tbf_csv(args.tbf_out, tbf_rows)
    for warning in warnings:
        print(f"biometrics: warning: {warning}", file=sys.stderr)
    print(
        f"biometrics: {len(individuals)} individuals, "
        f"{len(length_rows)} length rows, {len(tbf_rows)} tbf rows"
    )
    return EXIT_WARNINGS if warnings else EXIT_OK


def cmd_synth(args) -> int:
    with open(args.scene, "r", encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SynthError(f"{args.scene}:{exc.lineno}: invalid JSON: {exc.msg}")
    if args.seed is not None:
        raw["seed"] = args.seed
    scene = scene_from_dict(raw)
    data = generate(scene)
    sio.write_candidates(args.candidates_out, data.candidates)
    sio.write_tracks(args.tracks_out, oracle_tracks(data, perturb_px=args.perturb))
    sio.write_truth(args.truth_out, data)
    print(
        f"synth: {data.n_frames} frames, {len(data.candidates)} candidates, "
        f"{len(scene.swimmers)} swimmers, {len(scene.blobs)} blobs"
    )
    return EXIT_OK


def cmd_eval(args) -> int:
    preds_by_frame = sio.read_mask_rows(args.pred)
    gts_by_frame = sio.read_mask_rows(args.truth)
    frames = sorted(set(preds_by_frame) | set(gts_by_frame))
    preds = [preds_by_frame.get(f, []) for f in frames]
    gts = [gts_by_frame.get(f, []) for f in frames]
    metrics: dict = {
        "frames": len(frames),
        "dice": video_dice(preds, gts, only_positive_frames=args.only_positive_frames),
    }
    for threshold in args.iou_thresholds:
        p, r = precision_recall_at_iou(preds, gts, threshold)
        metrics[f"precision@{threshold:g}"] = p
        metrics[f"recall@{threshold:g}"] = r
    sio.write_metrics(args.report, metrics, args.csv)
    print(f"eval: dice={metrics['dice']:.6f} over {len(frames)} frames -> {args.report}")
    return EXIT_OK


def cmd_split(args) -> int:
    overrides = {
        "split": {
            "block_size": args.block_size,
            "seed": args.seed,
            "ratios": tuple(args.ratios) if args.ratios else None,
        }
    }
    config = RunConfig.load(args.config, overrides)
    frames = sio.read_frames_csv(args.frames)
    rows = time_block_split(frames, config.split)
    sio.write_split_csv(args.out, rows)
    counts: dict[str, int] = {}
    for row in rows:
        counts[row.split] = counts.get(row.split, 0) + 1
    blocks = len({row.block for row in rows})
    summary = " ".join(f"{name}={counts.get(name, 0)}" for name in ("train", "val", "test"))
    print(f"split: {len(rows)} frames in {blocks} blocks: {summary}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="swimtrack",
        description="Mask-based track alignment and swimming biometrics.",
    )
    parser.add_argument("--config", default=None, help="JSON config file")
    parser.add_argument("--seed", type=int, default=None, help="override random seed")
    parser.add_argument("--threads", type=int, default=1, help="worker threads")
    sub = parser.add_subparsers(dest="command", required=True)

    p_align = sub.add_parser("align", help="confirm individuals from candidates + tracks")
    p_align.add_argument("--candidates", required=True)
    p_align.add_argument("--tracks", required=True)
    p_align.add_argument("--out", required=True)
    p_align.add_argument("--interval-stride", type=int, default=None)
    p_align.add_argument("--score-threshold", type=float, default=None)
    p_align.add_argument("--iou-threshold", type=float, default=None)
    p_align.add_argument("--shark-label", default=None)
    p_align.add_argument("--min-support", type=int, default=None)
    p_align.set_defaults(func=cmd_align)

    p_bio = sub.add_parser("biometrics", help="length and tailbeat frequency CSVs")
    p_bio.add_argument("--individuals", required=True)
    p_bio.add_argument("--camera", default=None, help="camera config JSON")
    p_bio.add_argument("--lengths-out", required=True)
    p_bio.add_argument("--tbf-out", required=True)
    p_bio.add_argument("--displacement-out", required=True)
    p_bio.add_argument("--savgol-window", type=int, default=None)
    p_bio.add_argument("--savgol-order", type=int, default=None)
    p_bio.add_argument("--tbf-window", type=float, default=None)
    p_bio.add_argument("--tbf-step", type=float, default=None)
    p_bio.add_argument("--sensor-width-mm", type=float, default=None)
    p_bio.add_argument("--image-width-px", type=float, default=None)
    p_bio.add_argument("--altitude-m", type=float, default=None)
    p_bio.add_argument("--depth-m", type=float, default=None)
    p_bio.add_argument("--focal-length-mm", type=float, default=None)
    p_bio.add_argument("--fps", type=float, default=None)
    p_bio.set_defaults(func=cmd_biometrics)

    p_synth = sub.add_parser("synth", help="generate an oracle scene")
    p_synth.add_argument("--scene", required=True, help="scene spec JSON")
    p_synth.add_argument("--candidates-out", required=True)
    p_synth.add_argument("--tracks-out", required=True)
    p_synth.add_argument("--truth-out", required=True)
    p_synth.add_argument("--perturb", type=int, choices=(0, 1), default=0)
    p_synth.set_defaults(func=cmd_synth)

    p_eval = sub.add_parser("eval", help="segmentation metrics")
    p_eval.add_argument("--pred", required=True)
    p_eval.add_argument("--truth", required=True)
    p_eval.add_argument("--report", required=True)
    p_eval.add_argument("--csv", default=None)
    p_eval.add_argument(
        "--iou-thresholds",
        type=float,
        nargs="+",
        default=[0.35, 0.5],
    )
    p_eval.add_argument("--only-positive-frames", action="store_true")
    p_eval.set_defaults(func=cmd_eval)

    p_split = sub.add_parser("split", help="time-blocked train/val/test split")
    p_split.add_argument("--frames", required=True, help="CSV with video,frame")
    p_split.add_argument("--out", required=True)
    p_split.add_argument("--block-size", type=int, default=None)
    p_split.add_argument("--ratios", type=float, nargs=3, default=None,
                         metavar=("TRAIN", "VAL", "TEST"))
    p_split.set_defaults(func=cmd_split)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (
        sio.SchemaError,
        ConfigError,
        AlignmentError,
        SynthError,
        EvalError,
        KinematicsError,
        MorphometryError,
        MaskError,
        FileNotFoundError,
    ) as exc:
        print(f"swimtrack: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except PropagationError as exc:
        print(f"swimtrack: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
