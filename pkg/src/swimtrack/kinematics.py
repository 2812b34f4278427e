"""Tailbeat frequency from per-frame masks.

Per frame, the two farthest foreground pixels give the body axis; the end
nearer the center of mass is the head. The signed perpendicular offset of
the tail from the head-to-centroid line, tracked over frames, oscillates
once per tail sweep. After polynomial smoothing, zero crossings bracketed
by genuine extrema mark half-beats; every other crossing closes one full
beat, and a sliding window converts beats into a frequency series.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.signal import savgol_filter
from scipy.spatial import ConvexHull, QhullError

from .masks import BinaryMask, MaskError, PixelPoint, centroid
from .morphometry import CameraModel

# gaps shorter than this are bridged by linear interpolation; longer gaps
# split the series into independently processed segments
GAP_FILL_MAX_S = 0.5


class KinematicsError(ValueError):
    """Degenerate geometry or a series too short to process."""


@dataclass(frozen=True)
class KinematicsConfig:
    savgol_window: int = 15
    savgol_order: int = 3
    tbf_window_s: float = 5.0
    tbf_step_s: float = 0.5

    def __post_init__(self):
        if self.savgol_window % 2 != 1 or self.savgol_window <= self.savgol_order:
            raise KinematicsError(
                "savgol_window must be odd and greater than savgol_order"
            )
        if self.savgol_order < 0:
            raise KinematicsError("savgol_order must be >= 0")
        if not self.tbf_window_s > self.tbf_step_s > 0:
            raise KinematicsError("need tbf_window_s > tbf_step_s > 0")


@dataclass
class DisplacementSeries:
    """Per-frame signed tail offset; frames may be sparse."""

    fps: float
    frame_indices: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.frame_indices = np.asarray(self.frame_indices, dtype=int)
        self.values = np.asarray(self.values, dtype=float)
        if self.fps <= 0:
            raise KinematicsError("fps must be positive")
        if self.frame_indices.shape != self.values.shape:
            raise KinematicsError("frame_indices and values lengths differ")
        if np.any(np.diff(self.frame_indices) <= 0):
            raise KinematicsError("frame_indices must be strictly increasing")
        if not np.all(np.isfinite(self.values)):
            raise KinematicsError("displacement values must be finite")

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class BeatIntervals:
    crossing_times: tuple[float, ...]
    beats: tuple[tuple[float, float], ...]


@dataclass
class TbfSeries:
    window_centers_s: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.window_centers_s = np.asarray(self.window_centers_s, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if np.any(self.values < 0):
            raise KinematicsError("beat rates cannot be negative")


@dataclass
class HeadTail:
    head: PixelPoint
    tail: PixelPoint
    tie: bool = False


@dataclass
class KinematicsResult:
    displacement: DisplacementSeries
    smoothed: np.ndarray
    beats: BeatIntervals
    tbf: TbfSeries
    warnings: list[str] = field(default_factory=list)


def _candidate_points(m: BinaryMask) -> np.ndarray:
    """Points that can realize the farthest pair (hull vertices if possible)."""
    pts = np.array([(p.x, p.y) for p in m.pixels()], dtype=np.int64)
    if len(pts) > 16:
        try:
            hull = ConvexHull(pts.astype(float))
            return pts[hull.vertices]
        except QhullError:
            pass  # collinear pixel sets; brute force below
    return pts


def farthest_pair(m: BinaryMask) -> tuple[PixelPoint, PixelPoint]:
    """Exact farthest pair of foreground pixels, deterministic under ties.

    Ties break toward the pair whose (y, x)-sorted endpoints compare
    lexicographically smallest.
    """
    if m.area < 2:
        raise KinematicsError("farthest pair needs at least two pixels")
    pts = _candidate_points(m)
    diff = pts[:, None, :] - pts[None, :, :]
    d2 = (diff ** 2).sum(axis=2)
    best = d2.max()
    ii, jj = np.nonzero(d2 == best)
    best_pair = None
    for i, j in zip(ii.tolist(), jj.tolist()):
        if i >= j:
            continue
        a = (int(pts[i][1]), int(pts[i][0]))
        b = (int(pts[j][1]), int(pts[j][0]))
        key = (min(a, b), max(a, b))
        if best_pair is None or key < best_pair:
            best_pair = key
    (ay, ax), (by, bx) = best_pair
    return PixelPoint(ax, ay), PixelPoint(bx, by)


def head_tail(m: BinaryMask) -> HeadTail:
    """Label the farthest pair: the end nearer the centroid is the head."""
    p, q = farthest_pair(m)
    n = m.area
    sx = sy = 0
    for yy, x0, x1 in m.row_segments():
        cnt = x1 - x0 + 1
        sx += (x0 + x1) * cnt // 2
        sy += yy * cnt
    # compare n^2 * |point - centroid|^2 in exact integer arithmetic
    def d2(pt: PixelPoint) -> int:
        return (n * pt.x - sx) ** 2 + (n * pt.y - sy) ** 2

    dp, dq = d2(p), d2(q)
    if dp < dq:
        return HeadTail(head=p, tail=q)
    if dq < dp:
        return HeadTail(head=q, tail=p)
    first, second = sorted([p, q], key=lambda t: (t.y, t.x))
    return HeadTail(head=first, tail=second, tie=True)


def tail_displacement(m: BinaryMask) -> float:
    """Signed perpendicular offset of the tail from the head-centroid line.

    Positive when the tail lies to the left of the head-to-centroid
    direction (screen coordinates, y down).
    """
    ht = head_tail(m)
    com = centroid(m)
    cx, cy = com.x - ht.head.x, com.y - ht.head.y
    norm = math.hypot(cx, cy)
    if norm == 0.0:
        raise KinematicsError("degenerate centerline: head coincides with centroid")
    ux, uy = cx / norm, cy / norm
    vx, vy = ht.tail.x - com.x, ht.tail.y - com.y
    return vx * uy - vy * ux


def savgol_smooth(values: Sequence[float], cfg: KinematicsConfig) -> np.ndarray:
    """Least-squares polynomial smoothing with mirrored edges."""
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1:
        raise KinematicsError("expected a 1-D series")
    if len(arr) < cfg.savgol_window:
        raise KinematicsError(
            f"series of {len(arr)} frames is shorter than the smoothing window "
            f"({cfg.savgol_window}); use a shorter savgol_window"
        )
    return savgol_filter(
        arr, cfg.savgol_window, cfg.savgol_order, mode="mirror"
    )


# an extremum only counts as a turning point when it reaches this share
# of the series' peak magnitude; tiny residual wiggles around zero stay
# invisible to the crossing gate (and the rule stays scale-invariant)
EXTREMUM_SIGNIFICANCE = 0.05


def _significant_extrema(values: np.ndarray) -> list[tuple[float, int]]:
    """Plateau-aware local extrema as (position, kind); +1 max, -1 min.

    A maximal run of equal samples flanked by strictly lower (or higher)
    neighbours is one extremum at the run's center, so peaks sampled
    symmetrically around their apex are not lost to bit-equal neighbours.
    """
    v = values
    d = np.diff(v)
    nonzero = np.flatnonzero(d)
    if len(nonzero) < 2:
        return []
    vmax = float(np.max(np.abs(v)))
    if vmax == 0.0:
        return []
    out = []
    for a, b in zip(nonzero[:-1], nonzero[1:]):
        if d[a] > 0 > d[b]:
            kind = +1
        elif d[a] < 0 < d[b]:
            kind = -1
        else:
            continue
        if abs(v[a + 1]) >= EXTREMUM_SIGNIFICANCE * vmax:
            out.append(((a + 1 + b) / 2.0, kind))
    return out


def _raw_crossings(values: np.ndarray) -> list[float]:
    """Sub-sample sign-change positions (in sample units), zeros handled."""
    v = values
    out = []
    i = 0
    n = len(v)
    while i < n - 1:
        a, b = v[i], v[i + 1]
        if a == 0.0:
            # zero run: a crossing only if flanked by opposite signs
            j = i
            while j < n and v[j] == 0.0:
                j += 1
            if i > 0 and j < n and v[i - 1] * v[j] < 0:
                out.append((i + j - 1) / 2.0)
            i = max(j, i + 1)
            continue
        if a * b < 0:
            out.append(i + a / (a - b))
        i += 1
    return out


def find_crossings(values: Sequence[float], fps: float) -> list[float]:
    """Times (seconds) where the series meaningfully crosses zero.

    Significant local extrema partition the series into segments.
    Crossings in a segment bounded by two same-kind extrema are jitter
    and dropped; a transition segment (opposite extrema, or a series
    edge) keeps one crossing, the middle one if smoothing left several.
    """
    v = np.asarray(values, dtype=float)
    if fps <= 0:
        raise KinematicsError("fps must be positive")
    raw = _raw_crossings(v)
    if not raw:
        return []
    extrema = _significant_extrema(v)
    positions = [pos for pos, _ in extrema]
    kept: list[float] = []
    segment: list[float] = []

    def flush(lo_kind, hi_kind):
        if not segment:
            return
        if lo_kind is not None and hi_kind is not None and lo_kind == hi_kind:
            return  # wiggle between same-kind extrema: jitter
        kept.append(segment[len(segment) // 2])

    seg_idx = 0
    bounds = positions + [math.inf]
    lo_kind = None
    for c in raw:
        while c > bounds[seg_idx]:
            hi_kind = extrema[seg_idx][1]
            flush(lo_kind, hi_kind)
            segment.clear()
            lo_kind = hi_kind
            seg_idx += 1
        segment.append(c)
    flush(lo_kind, extrema[seg_idx][1] if seg_idx < len(extrema) else None)
    return [c / fps for c in kept]


def beat_intervals(crossings: Sequence[float]) -> BeatIntervals:
    """Pair every other crossing into full beats: (c0, c2), (c2, c4), ..."""
    times = tuple(float(c) for c in crossings)
    if any(b <= a for a, b in zip(times, times[1:])):
        raise KinematicsError("crossing times must be strictly increasing")
    beats = tuple(
        (times[k], times[k + 2]) for k in range(0, len(times) - 2, 2)
    )
    return BeatIntervals(crossing_times=times, beats=beats)


def fractional_beats(beats: BeatIntervals, window: tuple[float, float]) -> float:
    """Beat mass inside a window: each beat counts its covered fraction."""
    lo, hi = window
    total = 0.0
    for start, end in beats.beats:
        overlap = min(hi, end) - max(lo, start)
        if overlap > 0:
            total += overlap / (end - start)
    return total


def _covered_length(beats: BeatIntervals, window: tuple[float, float]) -> float:
    lo, hi = window
    covered = 0.0
    for start, end in beats.beats:
        overlap = min(hi, end) - max(lo, start)
        if overlap > 0:
            covered += overlap
    return covered


def windowed_tbf(
    beats: BeatIntervals, duration_s: float, cfg: KinematicsConfig
) -> TbfSeries:
    """Sliding-window beat rate in beats per second.

    Each window's fractional beat count is normalized by the length of the
    window actually covered by beats, so windows that extend past the
    observed beat span are not biased low. Windows with no beat coverage
    report zero.
    """
    if duration_s <= 0:
        raise KinematicsError("duration must be positive")
    if cfg.tbf_window_s >= duration_s:
        windows = [(0.0, duration_s)]
    else:
        starts = np.arange(
            0.0, duration_s - cfg.tbf_window_s + 1e-9, cfg.tbf_step_s
        )
        windows = [(float(s), float(s + cfg.tbf_window_s)) for s in starts]
    centers = []
    rates = []
    for window in windows:
        centers.append((window[0] + window[1]) / 2.0)
        covered = _covered_length(beats, window)
        if covered <= 0:
            rates.append(0.0)
        else:
            rates.append(fractional_beats(beats, window) / covered)
    return TbfSeries(np.array(centers), np.array(rates))


def _split_segments(
    frames: np.ndarray, values: np.ndarray, fps: float
) -> list[tuple[np.ndarray, np.ndarray]]:
    """Fill sub-threshold gaps by interpolation; split on longer gaps."""
    segments = []
    seg_frames = [int(frames[0])]
    seg_values = [float(values[0])]
    for k in range(1, len(frames)):
        step = int(frames[k]) - seg_frames[-1]
        if step == 1:
            seg_frames.append(int(frames[k]))
            seg_values.append(float(values[k]))
        elif step / fps < GAP_FILL_MAX_S:
            v0, v1 = seg_values[-1], float(values[k])
            f0 = seg_frames[-1]
            for j in range(1, step + 1):
                seg_frames.append(f0 + j)
                seg_values.append(v0 + (v1 - v0) * j / step)
        else:
            segments.append((np.array(seg_frames), np.array(seg_values)))
            seg_frames = [int(frames[k])]
            seg_values = [float(values[k])]
    segments.append((np.array(seg_frames), np.array(seg_values)))
    return segments


def estimate_tbf(
    masks: Mapping[int, BinaryMask], cam: CameraModel, cfg: KinematicsConfig
) -> KinematicsResult:
    """Full displacement-to-frequency pipeline for one individual."""
    fps = cam.fps
    warnings: list[str] = []
    frames = []
    values = []
    for f in sorted(masks):
        try:
            values.append(tail_displacement(masks[f]))
            frames.append(f)
        except (MaskError, KinematicsError) as exc:
            warnings.append(f"frame {f} skipped: {exc}")
    if len(frames) < cfg.savgol_window:
        raise KinematicsError(
            f"only {len(frames)} usable frames; the smoothing window needs "
            f"at least {cfg.savgol_window}"
        )

    all_frames: list[int] = []
    all_values: list[float] = []
    all_smoothed: list[float] = []
    crossing_times: list[float] = []
    all_beats: list[tuple[float, float]] = []
    for seg_frames, seg_values in _split_segments(
        np.array(frames), np.array(values), fps
    ):
        if len(seg_frames) < cfg.savgol_window:
            warnings.append(
                f"segment starting at frame {seg_frames[0]} has "
                f"{len(seg_frames)} frames, shorter than the smoothing "
                "window; skipped"
            )
            continue
        smoothed = savgol_smooth(seg_values, cfg)
        offset_s = seg_frames[0] / fps
        seg_crossings = [t + offset_s for t in find_crossings(smoothed, fps)]
        seg_beats = beat_intervals(seg_crossings)
        crossing_times.extend(seg_beats.crossing_times)
        all_beats.extend(seg_beats.beats)
        all_frames.extend(seg_frames.tolist())
        all_values.extend(seg_values.tolist())
        all_smoothed.extend(smoothed.tolist())

    if not all_frames:
        raise KinematicsError("no segment long enough for the smoothing window")

    beats = BeatIntervals(tuple(crossing_times), tuple(all_beats))
    duration_s = (max(all_frames) + 1) / fps
    tbf = windowed_tbf(beats, duration_s, cfg)
    series = DisplacementSeries(fps, np.array(all_frames), np.array(all_values))
    return KinematicsResult(
        displacement=series,
        smoothed=np.array(all_smoothed),
        beats=beats,
        tbf=tbf,
        warnings=warnings,
    )
