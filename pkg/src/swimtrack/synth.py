"""Synthetic undulating swimmers with exact ground truth.

Scenes render a tapered band swept along a traveling-wave midline, plus
optional short-lived circular blobs that imitate transient false
positives. Every frame's true mask, midline arc length and head position
are known analytically, which makes these scenes the oracle for the
alignment and biometrics pipelines.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict
import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from .alignment import (
    AlignmentError,
    CandidateDetection,
    TrackPropagator,
    TrackRecord,
)
from .masks import BinaryMask, bbox

MIDLINE_ARC_SAMPLES = 1000
_RASTER_SUBGRID = 2  # 2x2 subsamples per pixel, foreground on >= half
_RASTER_MEMO: dict = {}


class SynthError(ValueError):
    """Invalid scene specification."""


@dataclass(frozen=True)
class SwimmerSpec:
    body_length_px: float
    amplitude_px: float
    frequency_hz: float
    wavenumber: float
    fps: float
    duration_s: float
    image_width: int
    image_height: int
    start_x: float
    start_y: float
    heading_deg: float = 0.0
    speed_px_per_s: float = 0.0
    head_half_width_px: float = 7.0
    tail_half_width_px: float = 2.0
    frequency_slope_hz_per_s: float = 0.0
    shark_score: float = 0.99

    def __post_init__(self):
        for name in ("body_length_px", "fps", "duration_s",
                     "image_width", "image_height", "head_half_width_px",
                     "tail_half_width_px"):
            if not getattr(self, name) > 0:
                raise SynthError(f"{name} must be positive")
        # zero frequency/amplitude are legal: a static or straight swimmer
        if min(self.frequency_hz, self.amplitude_px, self.speed_px_per_s) < 0:
            raise SynthError(
                "frequency_hz, amplitude_px and speed_px_per_s must be >= 0"
            )
        if self.tail_half_width_px > self.head_half_width_px:
            raise SynthError("profile must taper: head wider than tail")
        if not 0.0 <= self.shark_score <= 1.0:
            raise SynthError("shark_score must lie in [0, 1]")

    @property
    def n_frames(self) -> int:
        return int(round(self.duration_s * self.fps))

    def half_width(self, s: np.ndarray) -> np.ndarray:
        """Linear taper from the head half-width down to the tail's."""
        return self.head_half_width_px + (
            self.tail_half_width_px - self.head_half_width_px
        ) * s

    def phase(self, t: float) -> float:
        return 2.0 * math.pi * (
            self.frequency_hz * t + 0.5 * self.frequency_slope_hz_per_s * t * t
        )

    def midline(self, t: float, n_samples: int) -> np.ndarray:
        """(n_samples, 2) midline points from head (s=0) to tail (s=1)."""
        s = np.linspace(0.0, 1.0, n_samples)
        heading = math.radians(self.heading_deg)
        ux, uy = math.cos(heading), math.sin(heading)
        # left normal in image coordinates (y grows downward)
        nx, ny = uy, -ux
        deflection = (
            self.amplitude_px
            * (0.1 + 0.9 * s)
            * np.sin(self.phase(t) - self.wavenumber * s)
        )
        head_x = self.start_x + self.speed_px_per_s * t * ux
        head_y = self.start_y + self.speed_px_per_s * t * uy
        x = head_x - s * self.body_length_px * ux + deflection * nx
        y = head_y - s * self.body_length_px * uy + deflection * ny
        return np.column_stack([x, y])

    def arc_length_px(self, t: float) -> float:
        pts = self.midline(t, MIDLINE_ARC_SAMPLES + 1)
        return float(np.sum(np.hypot(*(np.diff(pts, axis=0).T))))


@dataclass(frozen=True)
class BlobSpec:
    """A transient circular distractor, visible for [frame_start, frame_end)."""

    frame_start: int
    frame_end: int
    x: float
    y: float
    radius_px: float
    shark_score: float = 0.98

    def __post_init__(self):
        if self.frame_end <= self.frame_start:
            raise SynthError("blob frame range is empty")
        if self.radius_px <= 0:
            raise SynthError("blob radius must be positive")
        if not 0.0 <= self.shark_score <= 1.0:
            raise SynthError("shark_score must lie in [0, 1]")


@dataclass(frozen=True)
class SceneSpec:
    swimmers: tuple[SwimmerSpec, ...]
    blobs: tuple[BlobSpec, ...] = ()
    seed: int = 0
    interval_stride: int = 30
    shark_label: str = "shark"
    distractor_labels: tuple[str, ...] = ("water", "rock")

    def __post_init__(self):
        object.__setattr__(self, "swimmers", tuple(self.swimmers))
        object.__setattr__(self, "blobs", tuple(self.blobs))
        if not self.swimmers:
            raise SynthError("scene needs at least one swimmer")
        dims = {(s.image_width, s.image_height) for s in self.swimmers}
        if len(dims) != 1:
            raise SynthError("all swimmers must share image dimensions")
        rates = {(s.fps, s.n_frames) for s in self.swimmers}
        if len(rates) != 1:
            raise SynthError("all swimmers must share fps and duration")
        if self.interval_stride < 1:
            raise SynthError("interval_stride must be >= 1")

    @property
    def image_width(self) -> int:
        return self.swimmers[0].image_width

    @property
    def image_height(self) -> int:
        return self.swimmers[0].image_height

    @property
    def fps(self) -> float:
        return self.swimmers[0].fps

    @property
    def n_frames(self) -> int:
        return self.swimmers[0].n_frames

    def sampled_frames(self) -> list[int]:
        return list(range(0, self.n_frames, self.interval_stride))

    def scores_for(self, shark_score: float) -> dict[str, float]:
        rest = (1.0 - shark_score) / max(len(self.distractor_labels), 1)
        scores = {self.shark_label: shark_score}
        for label in self.distractor_labels:
            scores[label] = rest
        return scores


def _rasterize_swimmer(spec: SwimmerSpec, t: float) -> BinaryMask:
    """Offset-band rasterization with subpixel supersampling."""
    dense = max(int(spec.body_length_px * 10), 200)
    mid = spec.midline(t, dense)
    s_values = np.linspace(0.0, 1.0, dense)
    widths = spec.half_width(s_values)

    margin = float(widths.max()) + 1.5
    x_lo = max(int(math.floor(mid[:, 0].min() - margin)), 0)
    x_hi = min(int(math.ceil(mid[:, 0].max() + margin)), spec.image_width - 1)
    y_lo = max(int(math.floor(mid[:, 1].min() - margin)), 0)
    y_hi = min(int(math.ceil(mid[:, 1].max() + margin)), spec.image_height - 1)
    if x_hi < x_lo or y_hi < y_lo:
        return BinaryMask.empty(spec.image_width, spec.image_height)

    xs = np.arange(x_lo, x_hi + 1)
    ys = np.arange(y_lo, y_hi + 1)
    gx, gy = np.meshgrid(xs, ys)
    offsets = (np.arange(_RASTER_SUBGRID) + 0.5) / _RASTER_SUBGRID - 0.5
    tree = cKDTree(mid)
    votes = np.zeros(gx.shape, dtype=np.int16)
    for ox in offsets:
        for oy in offsets:
            pts = np.column_stack([(gx + ox).ravel(), (gy + oy).ravel()])
            dist, idx = tree.query(pts)
            # clip the end caps: points projecting past the midline ends
            # would otherwise extend the body beyond its arc length
            inside = (dist <= widths[idx]) & (idx > 0) & (idx < dense - 1)
            votes += inside.reshape(gx.shape)

    arr = np.zeros((spec.image_height, spec.image_width), dtype=bool)
    need = (_RASTER_SUBGRID * _RASTER_SUBGRID + 1) // 2
    arr[y_lo : y_hi + 1, x_lo : x_hi + 1] = votes >= need
    return BinaryMask.from_array(arr)


def _rasterize_blob(blob: BlobSpec, width: int, height: int) -> BinaryMask:
    xs = np.arange(width)
    ys = np.arange(height)
    gx, gy = np.meshgrid(xs, ys)
    offsets = (np.arange(_RASTER_SUBGRID) + 0.5) / _RASTER_SUBGRID - 0.5
    votes = np.zeros(gx.shape, dtype=np.int16)
    for ox in offsets:
        for oy in offsets:
            inside = (gx + ox - blob.x) ** 2 + (gy + oy - blob.y) ** 2 <= blob.radius_px ** 2
            votes += inside
    need = (_RASTER_SUBGRID * _RASTER_SUBGRID + 1) // 2
    return BinaryMask.from_array(votes >= need)


@dataclass
class FrameTruth:
    frame: int
    mask: BinaryMask
    arc_length_px: float
    head_xy: tuple[float, float]
    swimmer: int


@dataclass
class SceneData:
    """Everything the oracle knows about a generated scene."""

    spec: SceneSpec
    swimmer_masks: list[list[BinaryMask]]  # [swimmer][frame]
    blob_masks: list[dict[int, BinaryMask]]  # [blob] {frame: mask}
    truth: list[FrameTruth]
    candidates: list[CandidateDetection]
    candidate_objects: dict[tuple[int, int], tuple[str, int]]

    @property
    def n_frames(self) -> int:
        return self.spec.n_frames

    def true_masks_for(self, swimmer: int) -> dict[int, BinaryMask]:
        return {f: m for f, m in enumerate(self.swimmer_masks[swimmer])}


def _check_fits(spec: SwimmerSpec) -> None:
    margin = spec.head_half_width_px + 1.0
    for k in range(spec.n_frames):
        mid = spec.midline(k / spec.fps, 64)
        if (
            mid[:, 0].min() < margin
            or mid[:, 0].max() > spec.image_width - 1 - margin
            or mid[:, 1].min() < margin
            or mid[:, 1].max() > spec.image_height - 1 - margin
        ):
            raise SynthError(
                f"swimmer exits the frame at frame {k}; enlarge the image or "
                "shrink the motion"
            )


def generate(scene: SceneSpec) -> SceneData:
    """Render the scene and assemble ground truth and candidate records."""
    for swimmer in scene.swimmers:
        _check_fits(swimmer)
    for blob in scene.blobs:
        if not (
            0 <= blob.x - blob.radius_px
            and blob.x + blob.radius_px < scene.image_width
            and 0 <= blob.y - blob.radius_px
            and blob.y + blob.radius_px < scene.image_height
        ):
            raise SynthError("blob exits the frame")

    n = scene.n_frames
    fps = scene.fps
    swimmer_masks: list[list[BinaryMask]] = []
    truth: list[FrameTruth] = []
    for si, swimmer in enumerate(scene.swimmers):
        masks = []
        for k in range(n):
            t = k / fps
            # masks repeat whenever the wave phase and position recur, so
            # memoize; distinct scenes sharing a swimmer reuse entries too
            phase = round(swimmer.phase(t) % (2.0 * math.pi), 9)
            pos = round(swimmer.speed_px_per_s * t, 9)
            key = (swimmer, phase, pos)
            mask = _RASTER_MEMO.get(key)
            if mask is None:
                if len(_RASTER_MEMO) > 20000:
                    _RASTER_MEMO.clear()
                mask = _rasterize_swimmer(swimmer, t)
                _RASTER_MEMO[key] = mask
            masks.append(mask)
            truth.append(
                FrameTruth(
                    frame=k,
                    mask=mask,
                    arc_length_px=swimmer.arc_length_px(t),
                    head_xy=tuple(swimmer.midline(t, 2)[0]),
                    swimmer=si,
                )
            )
        swimmer_masks.append(masks)

    blob_masks: list[dict[int, BinaryMask]] = []
    for blob in scene.blobs:
        shape = _rasterize_blob(blob, scene.image_width, scene.image_height)
        blob_masks.append(
            {f: shape for f in range(blob.frame_start, min(blob.frame_end, n))}
        )

    candidates: list[CandidateDetection] = []
    candidate_objects: dict[tuple[int, int], tuple[str, int]] = {}
    for interval, frame in enumerate(scene.sampled_frames()):
        index = 0
        for si, masks in enumerate(swimmer_masks):
            m = masks[frame]
            if m.is_empty:
                continue
            candidates.append(
                CandidateDetection(
                    frame_index=frame,
                    mask=m,
                    bbox=bbox(m),
                    prompt_scores=scene.scores_for(scene.swimmers[si].shark_score),
                    interval_index=interval,
                    candidate_index=index,
                )
            )
            candidate_objects[(interval, index)] = ("swimmer", si)
            index += 1
        for bi, frames in enumerate(blob_masks):
            m = frames.get(frame)
            if m is None or m.is_empty:
                continue
            candidates.append(
                CandidateDetection(
                    frame_index=frame,
                    mask=m,
                    bbox=bbox(m),
                    prompt_scores=scene.scores_for(scene.blobs[bi].shark_score),
                    interval_index=interval,
                    candidate_index=index,
                )
            )
            candidate_objects[(interval, index)] = ("blob", bi)
            index += 1

    return SceneData(
        spec=scene,
        swimmer_masks=swimmer_masks,
        blob_masks=blob_masks,
        truth=truth,
        candidates=candidates,
        candidate_objects=candidate_objects,
    )


def _perturb(mask: BinaryMask, mode: int) -> BinaryMask:
    """Erode (mode 1) or dilate (mode 2) by one pixel; mode 0 is identity."""
    if mode == 0 or mask.is_empty:
        return mask
    arr = mask.to_array()
    structure = np.ones((3, 3), dtype=bool)
    if mode == 1:
        out = ndimage.binary_erosion(arr, structure)
        if not out.any():
            return mask
    else:
        out = ndimage.binary_dilation(arr, structure)
    return BinaryMask.from_array(out)


def oracle_tracks(
    data: SceneData, perturb_px: int = 0
) -> list[TrackRecord]:
    """Ground-truth tracks per sampled interval, optionally roughened.

    With ``perturb_px=1`` each track is uniformly eroded or dilated by one
    pixel (seeded choice), imitating tracker noise while keeping the
    cross-interval overlap far above the alignment threshold for wide
    bodies.
    """
    if perturb_px not in (0, 1):
        raise SynthError("perturb_px must be 0 or 1")
    tracks = []
    for (interval, index), (kind, oi) in sorted(data.candidate_objects.items()):
        # alternate erosion and dilation across origins so neighbouring
        # intervals compare differently-perturbed masks
        mode = 1 + (interval + index) % 2 if perturb_px else 0
        if kind == "swimmer":
            frames = {
                f: _perturb(m, mode)
                for f, m in enumerate(data.swimmer_masks[oi])
                if not m.is_empty
            }
        else:
            frames = {f: _perturb(m, mode) for f, m in data.blob_masks[oi].items()}
        tracks.append(
            TrackRecord(
                origin_interval=interval, origin_candidate=index, masks=frames
            )
        )
    return tracks


class SyntheticPropagator(TrackPropagator):
    """Propagator that replays the scene's ground-truth tracks."""

    def __init__(self, data: SceneData, perturb_px: int = 0):
        self._by_origin = {
            t.origin: t for t in oracle_tracks(data, perturb_px=perturb_px)
        }

    def propagate(self, candidate: CandidateDetection) -> TrackRecord:
        origin = (candidate.interval_index, candidate.candidate_index)
        track = self._by_origin.get(origin)
        if track is None:
            raise AlignmentError(f"no ground-truth track for origin {origin}")
        return track


def swimmer_from_dict(d: dict) -> SwimmerSpec:
    return SwimmerSpec(**d)


def scene_from_dict(d: dict) -> SceneSpec:
    """Build a scene from plain JSON-compatible data, rejecting unknown keys."""
    known = {"swimmers", "blobs", "seed", "interval_stride", "shark_label",
             "distractor_labels"}
    unknown = set(d) - known
    if unknown:
        raise SynthError(f"unknown scene keys: {sorted(unknown)}")
    try:
        swimmers = tuple(SwimmerSpec(**s) for s in d.get("swimmers", []))
        blobs = tuple(BlobSpec(**b) for b in d.get("blobs", []))
    except TypeError as exc:
        raise SynthError(f"bad swimmer or blob field: {exc}") from None
    return SceneSpec(
        swimmers=swimmers,
        blobs=blobs,
        seed=int(d.get("seed", 0)),
        interval_stride=int(d.get("interval_stride", 30)),
        shark_label=str(d.get("shark_label", "shark")),
        distractor_labels=tuple(d.get("distractor_labels", ("water", "rock"))),
    )


def scene_to_dict(scene: SceneSpec) -> dict:
    d = asdict(scene)
    d["swimmers"] = [asdict(s) for s in scene.swimmers]
    d["blobs"] = [asdict(b) for b in scene.blobs]
    d["distractor_labels"] = list(scene.distractor_labels)
    return d
