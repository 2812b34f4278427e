"""Produce candidate and track NDJSON from a clip and a backend."""

from __future__ import annotations

import json
import sys
from dataclasses import dataclass

from .backends import MaskGenerator, MaskPropagator, PromptScorer, default_backend
from .frames import FrameSource
from .wire import candidate_record, track_record


class PromptError(ValueError):
    pass


def load_prompts(path) -> list[str]:
    """Prompt file: one prompt per line, first line is the target label."""
    with open(path, "r", encoding="utf-8") as fh:
        prompts = [line.strip() for line in fh if line.strip()]
    if not prompts:
        raise PromptError(f"{path}: prompt file is empty")
    return prompts


def sampled_frames(n_frames: int, stride: int) -> list[int]:
    if stride < 1:
        raise ValueError("stride must be >= 1")
    return list(range(0, n_frames, stride))


def emit_candidates(
    clip: FrameSource,
    prompts: list[str],
    stride: int,
    out,
    generator: MaskGenerator | None = None,
    scorer: PromptScorer | None = None,
) -> int:
    """Write one candidate line per generated mask at each sampled frame."""
    if generator is None or scorer is None:
        gen_default, score_default, _ = default_backend()
        generator = generator or gen_default
        scorer = scorer or score_default
    written = 0
    for interval, frame_idx in enumerate(sampled_frames(len(clip), stride)):
        frame = clip[frame_idx]
        for mask in generator.generate(frame):
            scores = scorer.score(frame, mask, prompts)
            out.write(candidate_record(frame_idx, interval, mask, scores) + "\n")
            written += 1
    return written


@dataclass
class CandidateRow:
    frame: int
    interval: int
    index: int
    mask_text: str


def read_candidate_rows(path) -> list[CandidateRow]:
    """Re-read emitted candidates; the index is the order within interval."""
    counters: dict[int, int] = {}
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise PromptError(f"{path}:{line_no}: invalid JSON: {exc.msg}") from None
            try:
                frame, interval, mask = rec["frame"], rec["interval"], rec["mask"]
            except KeyError as exc:
                raise PromptError(f"{path}:{line_no}: missing key {exc}") from None
            index = counters.get(interval, 0)
            counters[interval] = index + 1
            rows.append(CandidateRow(frame, interval, index, mask))
    return rows


def decode_mask_text(text: str):
    import numpy as np

    parts = [int(p) for p in text.split()]
    width, height, runs = parts[0], parts[1], parts[2:]
    flat = np.zeros(width * height, dtype=bool)
    pos = 0
    value = False
    for run in runs:
        if value:
            flat[pos : pos + run] = True
        pos += run
        value = not value
    return flat.reshape(height, width)


def emit_tracks(
    clip: FrameSource,
    candidates_path,
    out,
    propagator: MaskPropagator | None = None,
) -> int:
    """Propagate every candidate into a track; skip failures with a warning.

    Output order is deterministic: (origin interval, candidate index,
    frame).
    """
    if propagator is None:
        _, _, propagator = default_backend()
    rows = read_candidate_rows(candidates_path)
    written = 0
    for row in sorted(rows, key=lambda r: (r.interval, r.index)):
        seed = decode_mask_text(row.mask_text)
        try:
            track = propagator.propagate(clip, row.frame, seed)
        except Exception as exc:  # noqa: BLE001 - backend is external code
            print(
                f"bridge: warning: tracking failed for interval {row.interval} "
                f"candidate {row.index}: {exc}",
                file=sys.stderr,
            )
            continue
        for frame in sorted(track):
            mask = track[frame]
            if not mask.any():
                continue
            out.write(track_record(row.interval, row.index, frame, mask) + "\n")
            written += 1
    return written
