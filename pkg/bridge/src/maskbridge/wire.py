"""Wire-format encoding for the downstream alignment toolchain.

Masks travel as text: ``width height r0 r1 r2 ...`` with row-major run
lengths, background first, summing to width * height. This module owns
the bridge's own encoder so the adapter has no code dependency on the
consumer package; the formats are the contract.
"""

from __future__ import annotations

import json

import numpy as np


def encode_mask(mask: np.ndarray) -> str:
    """Encode a 2-D boolean array into the canonical run-length text."""
    if mask.ndim != 2:
        raise ValueError(f"mask must be 2-D, got shape {mask.shape}")
    height, width = mask.shape
    flat = mask.ravel().astype(bool)
    breaks = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    bounds = np.concatenate(([0], breaks, [flat.size]))
    runs = np.diff(bounds).tolist()
    if flat[0]:
        runs.insert(0, 0)
    return " ".join([str(width), str(height), *map(str, runs)])


def mask_bbox(mask: np.ndarray) -> list[int]:
    """Tight inclusive [x_min, y_min, x_max, y_max] of a nonempty mask."""
    ys, xs = np.nonzero(mask)
    if len(xs) == 0:
        raise ValueError("empty mask has no bounding box")
    return [int(xs.min()), int(ys.min()), int(xs.max()), int(ys.max())]


def candidate_record(frame: int, interval: int, mask: np.ndarray,
                     scores: dict[str, float]) -> str:
    return json.dumps(
        {
            "frame": int(frame),
            "interval": int(interval),
            "mask": encode_mask(mask),
            "bbox": mask_bbox(mask),
            "scores": {str(k): float(v) for k, v in sorted(scores.items())},
        },
        sort_keys=True,
    )


def track_record(origin_interval: int, origin_candidate: int, frame: int,
                 mask: np.ndarray) -> str:
    return json.dumps(
        {
            "origin_interval": int(origin_interval),
            "origin_candidate": int(origin_candidate),
            "frame": int(frame),
            "mask": encode_mask(mask),
        },
        sort_keys=True,
    )
