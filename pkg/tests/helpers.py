"""Shared mask builders and oracle scene constructions for the tests."""

from __future__ import annotations

import functools

import numpy as np

from swimtrack.masks import BinaryMask
from swimtrack.synth import BlobSpec, SceneSpec, SwimmerSpec, generate


@functools.lru_cache(maxsize=32)
def cached_generate(scene: SceneSpec):
    """Scene rendering is deterministic, so share it across tests."""
    return generate(scene)


def box_mask(w: int, h: int, x0: int, y0: int, x1: int, y1: int) -> BinaryMask:
    arr = np.zeros((h, w), dtype=bool)
    arr[y0 : y1 + 1, x0 : x1 + 1] = True
    return BinaryMask.from_array(arr)


def random_mask(rng: np.random.Generator, w: int = 32, h: int = 32) -> BinaryMask:
    density = rng.uniform(0.0, 1.0)
    return BinaryMask.from_array(rng.random((h, w)) < density)


def tbf_swimmer(frequency_hz: float, slope: float = 0.0) -> SwimmerSpec:
    return SwimmerSpec(
        body_length_px=120.0,
        amplitude_px=12.0,
        frequency_hz=frequency_hz,
        wavenumber=4.0,
        fps=30.0,
        duration_s=20.0,
        image_width=220,
        image_height=160,
        start_x=180.0,
        start_y=80.0,
        frequency_slope_hz_per_s=slope,
    )


def straight_swimmer(body_length_px: float = 158.7) -> SwimmerSpec:
    return SwimmerSpec(
        body_length_px=body_length_px,
        amplitude_px=0.0,
        frequency_hz=0.5,
        wavenumber=2.0,
        fps=30.0,
        duration_s=1.0,
        image_width=240,
        image_height=120,
        start_x=200.0,
        start_y=60.0,
    )


def cycle_swimmer() -> SwimmerSpec:
    """One full undulation cycle at amplitude 0.1 * body length."""
    return SwimmerSpec(
        body_length_px=120.0,
        amplitude_px=12.0,
        frequency_hz=0.5,
        wavenumber=2.0,
        fps=30.0,
        duration_s=2.0,
        image_width=240,
        image_height=160,
        start_x=190.0,
        start_y=80.0,
    )


def alignment_swimmer(duration_s: float = 3.2, wide: bool = False) -> SwimmerSpec:
    return SwimmerSpec(
        body_length_px=60.0,
        amplitude_px=5.0,
        frequency_hz=0.4,
        wavenumber=2.0,
        fps=30.0,
        duration_s=duration_s,
        image_width=128,
        image_height=128,
        start_x=100.0,
        start_y=40.0,
        head_half_width_px=12.0 if wide else 6.0,
        tail_half_width_px=8.0 if wide else 2.5,
    )


def fp_scene(seed: int, n_blobs: int, wide: bool = False) -> SceneSpec:
    """Persistent swimmer plus single-interval transient blobs.

    Blob frame windows stay local to one sampled frame, so blobs from
    different intervals never coexist and can never support each other.
    """
    rng = np.random.default_rng(seed)
    swimmer = alignment_swimmer(wide=wide)
    n_frames = swimmer.n_frames
    sampled = list(range(0, n_frames, 30))
    if len(sampled) < 4:
        raise AssertionError("scene too short for the acceptance construction")
    blobs = []
    for _ in range(n_blobs):
        interval = int(rng.integers(1, len(sampled)))
        sf = sampled[interval]
        blobs.append(
            BlobSpec(
                frame_start=max(sf - 4, 0),
                frame_end=min(sf + 6, n_frames),
                x=float(rng.uniform(15, 113)),
                y=float(rng.uniform(85, 115)),
                radius_px=float(rng.uniform(3.0, 5.0)),
                shark_score=0.98,
            )
        )
    return SceneSpec(swimmers=(swimmer,), blobs=tuple(blobs), seed=seed)


def two_swimmer_scene(seed: int = 0) -> SceneSpec:
    a = alignment_swimmer()
    b = SwimmerSpec(
        body_length_px=50.0,
        amplitude_px=4.0,
        frequency_hz=0.6,
        wavenumber=2.0,
        fps=30.0,
        duration_s=a.duration_s,
        image_width=a.image_width,
        image_height=a.image_height,
        start_x=95.0,
        start_y=100.0,
        head_half_width_px=5.0,
        tail_half_width_px=2.0,
    )
    return SceneSpec(swimmers=(a, b), seed=seed)
