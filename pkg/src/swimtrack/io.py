"""Streaming NDJSON and CSV formats shared by the pipeline commands.

One JSON record per line keeps memory flat on long videos. Readers
validate strictly and report the offending line number; writers emit
records in a deterministic order so reruns are byte-identical.
"""

from __future__ import annotations

import csv
import json
from typing import Iterable, Iterator, Sequence

from .alignment import CandidateDetection, ConfirmedIndividual, TrackRecord
from .evaluation import SplitRow
from .masks import BinaryMask, BoundingBox, MaskError, mask_from_text, mask_to_text
from .morphometry import CameraModel, MorphometryError


class SchemaError(ValueError):
    """A line of input that violates the wire format."""

    def __init__(self, path, line_no: int, message: str):
        self.path = str(path)
        self.line_no = line_no
        super().__init__(f"{self.path}:{line_no}: {message}")


def _records(path) -> Iterator[tuple[int, dict]]:
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(path, line_no, f"invalid JSON: {exc.msg}") from None
            if not isinstance(record, dict):
                raise SchemaError(path, line_no, "record is not a JSON object")
            yield line_no, record


def _require_keys(path, line_no: int, record: dict, required: dict) -> None:
    missing = set(required) - set(record)
    if missing:
        raise SchemaError(path, line_no, f"missing keys: {sorted(missing)}")
    unknown = set(record) - set(required)
    if unknown:
        raise SchemaError(path, line_no, f"unknown keys: {sorted(unknown)}")
    for key, kinds in required.items():
        if not isinstance(record[key], kinds):
            raise SchemaError(
                path, line_no, f"key {key!r} has type {type(record[key]).__name__}"
            )


def _parse_mask(path, line_no: int, text) -> BinaryMask:
    try:
        return mask_from_text(text)
    except MaskError as exc:
        raise SchemaError(path, line_no, f"bad mask: {exc}") from None


def read_candidates(path) -> list[CandidateDetection]:
    """Read the candidate stream, assigning per-interval candidate indices."""
    schema = {
        "frame": int,
        "interval": int,
        "mask": str,
        "bbox": list,
        "scores": dict,
    }
    counters: dict[int, int] = {}
    out: list[CandidateDetection] = []
    for line_no, rec in _records(path):
        _require_keys(path, line_no, rec, schema)
        box = rec["bbox"]
        if len(box) != 4 or not all(isinstance(v, int) for v in box):
            raise SchemaError(path, line_no, "bbox must be four integers")
        scores = rec["scores"]
        for label, p in scores.items():
            if not isinstance(p, (int, float)) or not 0.0 <= float(p) <= 1.0:
                raise SchemaError(
                    path, line_no, f"score for {label!r} must lie in [0, 1]"
                )
        mask = _parse_mask(path, line_no, rec["mask"])
        interval = rec["interval"]
        index = counters.get(interval, 0)
        counters[interval] = index + 1
        try:
            out.append(
                CandidateDetection(
                    frame_index=rec["frame"],
                    mask=mask,
                    bbox=BoundingBox(*box),
                    prompt_scores={str(k): float(v) for k, v in scores.items()},
                    interval_index=interval,
                    candidate_index=index,
                )
            )
        except ValueError as exc:
            raise SchemaError(path, line_no, str(exc)) from None
    return out


def write_candidates(path, candidates: Iterable[CandidateDetection]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for c in candidates:
            fh.write(
                json.dumps(
                    {
                        "frame": c.frame_index,
                        "interval": c.interval_index,
                        "mask": mask_to_text(c.mask),
                        "bbox": list(c.bbox),
                        "scores": {k: float(v) for k, v in sorted(c.prompt_scores.items())},
                    },
                    sort_keys=True,
                )
                + "\n"
            )


def read_tracks(path) -> list[TrackRecord]:
    """Read track rows grouped by (origin_interval, origin_candidate)."""
    schema = {"origin_interval": int, "origin_candidate": int, "frame": int, "mask": str}
    grouped: dict[tuple[int, int], dict[int, BinaryMask]] = {}
    order: list[tuple[int, int]] = []
    for line_no, rec in _records(path):
        _require_keys(path, line_no, rec, schema)
        origin = (rec["origin_interval"], rec["origin_candidate"])
        frames = grouped.get(origin)
        if frames is None:
            frames = grouped[origin] = {}
            order.append(origin)
        if rec["frame"] in frames:
            raise SchemaError(
                path, line_no, f"duplicate frame {rec['frame']} for origin {origin}"
            )
        frames[rec["frame"]] = _parse_mask(path, line_no, rec["mask"])
    out = []
    for origin in order:
        try:
            out.append(
                TrackRecord(
                    origin_interval=origin[0],
                    origin_candidate=origin[1],
                    masks=grouped[origin],
                )
            )
        except ValueError as exc:
            raise SchemaError(path, 0, f"track {origin}: {exc}") from None
    return out


def write_tracks(path, tracks: Iterable[TrackRecord]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for t in sorted(tracks, key=lambda t: t.origin):
            for frame in sorted(t.masks):
                fh.write(
                    json.dumps(
                        {
                            "origin_interval": t.origin_interval,
                            "origin_candidate": t.origin_candidate,
                            "frame": frame,
                            "mask": mask_to_text(t.masks[frame]),
                        },
                        sort_keys=True,
                    )
                    + "\n"
                )


def write_individuals(path, individuals: Iterable[ConfirmedIndividual]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ind in sorted(individuals, key=lambda i: i.id):
            for frame in sorted(ind.masks):
                fh.write(
                    json.dumps(
                        {
                            "id": ind.id,
                            "frame": frame,
                            "mask": mask_to_text(ind.masks[frame]),
                        },
                        sort_keys=True,
                    )
                    + "\n"
                )


def read_individuals(path) -> dict[int, dict[int, BinaryMask]]:
    """Read per-individual per-frame masks keyed by id then frame."""
    schema = {"id": int, "frame": int, "mask": str}
    out: dict[int, dict[int, BinaryMask]] = {}
    for line_no, rec in _records(path):
        _require_keys(path, line_no, rec, schema)
        frames = out.setdefault(rec["id"], {})
        if rec["frame"] in frames:
            raise SchemaError(
                path, line_no, f"duplicate frame {rec['frame']} for id {rec['id']}"
            )
        frames[rec["frame"]] = _parse_mask(path, line_no, rec["mask"])
    return out


def read_mask_rows(path) -> dict[int, list[BinaryMask]]:
    """Read any mask-per-frame NDJSON into frame -> list of masks.

    Accepts the individuals format ({id, frame, mask}) and the ground
    truth format ({frame, true_mask, ...}); used by the eval command.
    """
    out: dict[int, list[BinaryMask]] = {}
    for line_no, rec in _records(path):
        if "frame" not in rec:
            continue  # scene-level metadata line
        key = "mask" if "mask" in rec else "true_mask" if "true_mask" in rec else None
        if key is None:
            raise SchemaError(path, line_no, "record has neither mask nor true_mask")
        if not isinstance(rec["frame"], int):
            raise SchemaError(path, line_no, "frame must be an integer")
        out.setdefault(rec["frame"], []).append(
            _parse_mask(path, line_no, rec[key])
        )
    return out


def write_truth(path, data) -> None:
    """Ground-truth NDJSON: a scene header line, then one row per frame."""
    scene = data.spec
    with open(path, "w", encoding="utf-8") as fh:
        header = {
            "frequency_hz": scene.swimmers[0].frequency_hz,
            "frequencies_hz": [s.frequency_hz for s in scene.swimmers],
            "fps": scene.fps,
            "n_frames": scene.n_frames,
        }
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for ft in data.truth:
            fh.write(
                json.dumps(
                    {
                        "frame": ft.frame,
                        "true_mask": mask_to_text(ft.mask),
                        "arc_length_px": float(ft.arc_length_px),
                        "head_xy": [float(ft.head_xy[0]), float(ft.head_xy[1])],
                        "object": ft.swimmer,
                    },
                    sort_keys=True,
                )
                + "\n"
            )


def read_camera(path) -> CameraModel:
    """Camera config JSON with exactly the six camera keys."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(path, exc.lineno, f"invalid JSON: {exc.msg}") from None
    return camera_from_dict(raw, source=path)


def camera_from_dict(raw: dict, source="camera config") -> CameraModel:
    keys = {
        "sensor_width_mm",
        "image_width_px",
        "altitude_m",
        "depth_m",
        "focal_length_mm",
        "fps",
    }
    if not isinstance(raw, dict):
        raise SchemaError(source, 0, "camera config must be a JSON object")
    missing = keys - set(raw)
    unknown = set(raw) - keys
    if missing:
        raise SchemaError(source, 0, f"missing camera keys: {sorted(missing)}")
    if unknown:
        raise SchemaError(source, 0, f"unknown camera keys: {sorted(unknown)}")
    try:
        return CameraModel(**{k: float(raw[k]) for k in keys})
    except (TypeError, ValueError, MorphometryError) as exc:
        raise SchemaError(source, 0, str(exc)) from None


def _fmt(value: float) -> str:
    return format(float(value), ".9g")


def write_lengths_csv(path, rows: Iterable[tuple[int, int, float, float]]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["frame", "individual_id", "length_px", "length_m"])
        for frame, ind, px, m in rows:
            writer.writerow([frame, ind, _fmt(px), _fmt(m)])


def write_displacement_csv(path, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["frame", "individual_id", "displacement_px", "displacement_smoothed_px"]
        )
        for frame, ind, raw, smoothed in rows:
            writer.writerow([frame, ind, _fmt(raw), _fmt(smoothed)])


def write_tbf_csv(path, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["window_center_s", "individual_id", "tbf_hz"])
        for center, ind, value in rows:
            writer.writerow([_fmt(center), ind, _fmt(value)])


def write_split_csv(path, rows: Sequence[SplitRow]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["video", "frame", "block", "split"])
        for row in rows:
            writer.writerow([row.video, row.frame, row.block, row.split])


def read_frames_csv(path) -> list[tuple[str, int]]:
    """Frame table CSV with header video,frame."""
    out = []
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:2]] != ["video", "frame"]:
            raise SchemaError(path, 1, "expected header: video,frame")
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) < 2:
                raise SchemaError(path, line_no, "expected columns video,frame")
            try:
                out.append((row[0], int(row[1])))
            except ValueError:
                raise SchemaError(path, line_no, f"bad frame index {row[1]!r}") from None
    return out


def write_metrics(path, metrics: dict, csv_path=None) -> None:
    """Flat key=value report, optionally mirrored as a two-column CSV."""
    with open(path, "w", encoding="utf-8") as fh:
        for key in sorted(metrics):
            value = metrics[key]
            text = _fmt(value) if isinstance(value, float) else str(value)
            fh.write(f"{key}={text}\n")
    if csv_path is not None:
        with open(csv_path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["metric", "value"])
            for key in sorted(metrics):
                value = metrics[key]
                text = _fmt(value) if isinstance(value, float) else str(value)
                writer.writerow([key, text])
