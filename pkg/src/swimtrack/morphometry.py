"""Centerline length from a mask: thinning, longest path, meter conversion.

The body length of an elongated mask is the longest geodesic path through
its skeleton (orthogonal steps cost 1, diagonal steps sqrt(2)), extended
at both ends along the local path direction until leaving the mask. Using
the longest path instead of the total skeleton size keeps fin spurs from
inflating the measurement.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from .masks import BinaryMask, MaskError, PixelPoint


class MorphometryError(ValueError):
    """Invalid camera parameters or degenerate geometry."""


@dataclass(frozen=True)
class CameraModel:
    """Imaging geometry used to convert pixel lengths to meters."""

    sensor_width_mm: float
    image_width_px: float
    altitude_m: float
    depth_m: float
    focal_length_mm: float
    fps: float

    def __post_init__(self):
        strict = {
            "sensor_width_mm": self.sensor_width_mm,
            "image_width_px": self.image_width_px,
            "altitude_m": self.altitude_m,
            "focal_length_mm": self.focal_length_mm,
            "fps": self.fps,
        }
        for name, value in strict.items():
            if not value > 0:
                raise MorphometryError(f"{name} must be positive, got {value}")
        if self.depth_m < 0:
            raise MorphometryError(f"depth_m must be >= 0, got {self.depth_m}")

    @property
    def meters_per_pixel(self) -> float:
        return (self.sensor_width_mm / self.image_width_px) * (
            (self.altitude_m + self.depth_m) / self.focal_length_mm
        )


_SQRT2 = math.sqrt(2.0)
_NEIGHBORS = [(-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)]


class Skeleton:
    """Pixel set of a thinned mask with its 8-connectivity graph."""

    def __init__(self, pixels, width: int, height: int):
        self.pixels = frozenset(PixelPoint(int(x), int(y)) for x, y in pixels)
        self.width = width
        self.height = height

    def neighbors(self, p: PixelPoint) -> list[PixelPoint]:
        out = []
        for dx, dy in _NEIGHBORS:
            q = PixelPoint(p.x + dx, p.y + dy)
            if q in self.pixels:
                out.append(q)
        return out

    @property
    def endpoints(self) -> list[PixelPoint]:
        return sorted(
            (p for p in self.pixels if len(self.neighbors(p)) == 1),
            key=lambda p: (p.y, p.x),
        )

    def to_mask(self) -> BinaryMask:
        return BinaryMask.from_pixels(self.width, self.height, self.pixels)

    def __len__(self) -> int:
        return len(self.pixels)


def _thin_pass(img: np.ndarray, second: bool) -> bool:
    """One parallel deletion subpass; returns True if anything changed."""
    p2 = img[:-2, 1:-1]
    p3 = img[:-2, 2:]
    p4 = img[1:-1, 2:]
    p5 = img[2:, 2:]
    p6 = img[2:, 1:-1]
    p7 = img[2:, :-2]
    p8 = img[1:-1, :-2]
    p9 = img[:-2, :-2]
    center = img[1:-1, 1:-1]

    ring = [p2, p3, p4, p5, p6, p7, p8, p9]
    b = sum(ring)
    transitions = np.zeros_like(b)
    for a, c in zip(ring, ring[1:] + ring[:1]):
        transitions += (a == 0) & (c == 1)

    if second:
        cond_a = p2 * p4 * p8 == 0
        cond_b = p2 * p6 * p8 == 0
    else:
        cond_a = p2 * p4 * p6 == 0
        cond_b = p4 * p6 * p8 == 0

    remove = (
        (center == 1)
        & (b >= 2)
        & (b <= 6)
        & (transitions == 1)
        & cond_a
        & cond_b
    )
    if not remove.any():
        return False
    center[remove] = 0
    return True


def skeletonize(m: BinaryMask) -> Skeleton:
    """Iterative two-subpass thinning down to a unit-width curve.

    Runs until a full pass deletes nothing, so the result is a fixed point
    of both subpasses. Degenerate blobs that thin away entirely (2x2
    squares do) fall back to the single pixel nearest the blob centroid.
    """
    if m.is_empty:
        raise MaskError("cannot skeletonize an empty mask")
    arr = m.to_array().astype(np.uint8)
    img = np.pad(arr, 1)
    while True:
        changed = _thin_pass(img, second=False)
        changed |= _thin_pass(img, second=True)
        if not changed:
            break
    ys, xs = np.nonzero(img[1:-1, 1:-1])
    if len(xs) == 0:
        ys0, xs0 = np.nonzero(arr)
        cx, cy = xs0.mean(), ys0.mean()
        k = int(np.argmin((xs0 - cx) ** 2 + (ys0 - cy) ** 2))
        xs, ys = xs0[k : k + 1], ys0[k : k + 1]
    return Skeleton(zip(xs.tolist(), ys.tolist()), m.width, m.height)


def _path_neighbors(skel: Skeleton, p: PixelPoint) -> list[tuple[PixelPoint, float]]:
    """Graph edges for path traversal: 8-connectivity without corner cuts.

    A diagonal step is dropped when an orthogonal pixel it would skirt is
    itself on the skeleton, so path length follows the curve instead of
    chording across corners.
    """
    out = []
    for q in skel.neighbors(p):
        if q.x == p.x or q.y == p.y:
            out.append((q, 1.0))
        elif (
            PixelPoint(p.x, q.y) in skel.pixels
            or PixelPoint(q.x, p.y) in skel.pixels
        ):
            continue
        else:
            out.append((q, _SQRT2))
    return out


def _dijkstra(skel: Skeleton, source: PixelPoint):
    dist = {source: 0.0}
    prev: dict[PixelPoint, PixelPoint] = {}
    heap = [(0.0, (source.y, source.x), source)]
    while heap:
        d, _, p = heapq.heappop(heap)
        if d > dist.get(p, math.inf):
            continue
        for q, step in _path_neighbors(skel, p):
            nd = d + step
            if nd < dist.get(q, math.inf) - 1e-12:
                dist[q] = nd
                prev[q] = p
                heapq.heappush(heap, (nd, (q.y, q.x), q))
    return dist, prev


def longest_path(skel: Skeleton) -> tuple[float, list[PixelPoint]]:
    """Longest geodesic between skeleton endpoints.

    Skeletons without two endpoints (single pixels, closed loops) fall
    back to searching between all pixel pairs. Disconnected skeletons
    yield the longest path within any one component.
    """
    if not skel.pixels:
        raise MorphometryError("empty skeleton")
    terminals = skel.endpoints
    if len(terminals) < 2:
        terminals = sorted(skel.pixels, key=lambda p: (p.y, p.x))
    if len(terminals) == 1:
        return 0.0, [terminals[0]]

    best = None
    for source in terminals:
        dist, prev = _dijkstra(skel, source)
        for target in terminals:
            if target == source:
                continue
            d = dist.get(target)
            if d is None:
                continue
            key = (-d, min((source.y, source.x), (target.y, target.x)),
                   max((source.y, source.x), (target.y, target.x)))
            if best is None or key < best[0]:
                path = [target]
                while path[-1] != source:
                    path.append(prev[path[-1]])
                path.reverse()
                best = (key, d, path)
    if best is None:
        only = sorted(skel.pixels, key=lambda p: (p.y, p.x))[0]
        return 0.0, [only]
    return best[1], best[2]


def _march_extension(
    tip: PixelPoint, direction: tuple[float, float], m: BinaryMask, arr: np.ndarray
) -> float:
    """Distance from a path tip along ``direction`` to the mask boundary."""
    norm = math.hypot(*direction)
    if norm == 0.0:
        return 0.0
    ux, uy = direction[0] / norm, direction[1] / norm
    step = 0.5
    limit = math.hypot(m.width, m.height)
    t = step
    reached = 0.0
    while t <= limit:
        x = int(round(tip.x + t * ux))
        y = int(round(tip.y + t * uy))
        if not (0 <= x < m.width and 0 <= y < m.height) or not arr[y, x]:
            break
        reached = t
        t += step
    return reached


def distal_extension(path: list[PixelPoint], m: BinaryMask) -> float:
    """Sum of the two end extensions along the local path direction.

    The direction at each end is the average of the last three path steps
    (undefined for single-pixel paths, which contribute nothing).
    """
    if len(path) < 2:
        return 0.0
    arr = m.to_array()
    total = 0.0
    for tip, inner in ((path[-1], path), (path[0], path[::-1])):
        k = min(3, len(inner) - 1)
        anchor = inner[-1 - k]
        direction = ((tip.x - anchor.x) / k, (tip.y - anchor.y) / k)
        total += _march_extension(tip, direction, m, arr)
    return total


def skeleton_length_px(skel: Skeleton, m: BinaryMask) -> float:
    """Longest geodesic path length plus both distal extensions, in pixels."""
    length, path = longest_path(skel)
    return length + distal_extension(path, m)


def pixels_to_meters(length_px: float, cam: CameraModel) -> float:
    """Scale a pixel length to meters from the camera geometry."""
    if length_px < 0:
        raise MorphometryError(f"pixel length must be >= 0, got {length_px}")
    return cam.meters_per_pixel * length_px


def measure_length(m: BinaryMask, cam: CameraModel) -> float:
    """Centerline body length of a mask, in meters."""
    return pixels_to_meters(skeleton_length_px(skeletonize(m), m), cam)
