"""Run-length encoded binary masks and exact pixel geometry.

Masks are stored row-major as alternating run lengths, background first:
``runs[0]`` is the count of leading background pixels (possibly zero) and
the runs always sum to ``width * height``. Area, bounding box, centroid,
IOU and Dice are all computed directly on the run intervals, never by
decoding to a bitmap, so they are exact and cheap on sparse masks.

Coordinate convention: x grows rightward, y grows downward, origin at the
top-left pixel.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np


class MaskError(ValueError):
    """Malformed mask data or incompatible mask operands."""


class PixelPoint(NamedTuple):
    x: int
    y: int


class RealPoint(NamedTuple):
    x: float
    y: float


class BoundingBox(NamedTuple):
    x_min: int
    y_min: int
    x_max: int
    y_max: int

    @property
    def width(self) -> int:
        return self.x_max - self.x_min + 1

    @property
    def height(self) -> int:
        return self.y_max - self.y_min + 1


@dataclass(frozen=True)
class BinaryMask:
    """Immutable per-frame foreground mask in run-length encoding."""

    width: int
    height: int
    runs: tuple[int, ...]

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise MaskError(
                f"mask dimensions must be positive, got {self.width}x{self.height}"
            )
        runs = tuple(int(r) for r in self.runs)
        object.__setattr__(self, "runs", runs)
        if not runs:
            raise MaskError("run list is empty")
        if runs[0] < 0:
            raise MaskError("negative run length")
        if any(r <= 0 for r in runs[1:]):
            raise MaskError("only the first run may be zero")
        total = sum(runs)
        if total != self.width * self.height:
            raise MaskError(
                f"runs sum to {total}, expected {self.width * self.height}"
            )

    @classmethod
    def empty(cls, width: int, height: int) -> "BinaryMask":
        return cls(width, height, (width * height,))

    @classmethod
    def full(cls, width: int, height: int) -> "BinaryMask":
        return cls(width, height, (0, width * height))

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "BinaryMask":
        """Encode a (height, width) array; any nonzero value is foreground."""
        arr = np.asarray(arr)
        if arr.ndim != 2:
            raise MaskError(f"expected a 2-D array, got shape {arr.shape}")
        height, width = arr.shape
        flat = arr.ravel().astype(bool)
        if flat.size == 0:
            raise MaskError("cannot encode an empty array")
        breaks = np.flatnonzero(flat[1:] != flat[:-1]) + 1
        bounds = np.concatenate(([0], breaks, [flat.size]))
        runs = np.diff(bounds).tolist()
        if flat[0]:
            runs.insert(0, 0)
        return cls(width, height, tuple(runs))

    @classmethod
    def from_pixels(
        cls, width: int, height: int, pixels: Iterable[tuple[int, int]]
    ) -> "BinaryMask":
        """Build a mask from (x, y) foreground coordinates."""
        arr = np.zeros((height, width), dtype=bool)
        for x, y in pixels:
            if not (0 <= x < width and 0 <= y < height):
                raise MaskError(f"pixel ({x}, {y}) outside {width}x{height} image")
            arr[y, x] = True
        return cls.from_array(arr)

    @classmethod
    def from_intervals(
        cls, width: int, height: int, intervals: Sequence[tuple[int, int]]
    ) -> "BinaryMask":
        """Build a mask from sorted, disjoint [start, end) linear intervals.

        Touching intervals are coalesced so the encoding stays canonical.
        """
        size = width * height
        runs: list[int] = []
        pos = 0
        for start, end in intervals:
            if start < pos or end <= start or end > size:
                raise MaskError(f"bad interval ({start}, {end}) at position {pos}")
            gap = start - pos
            if gap == 0 and runs:
                runs[-1] += end - start
            else:
                runs.append(gap)
                runs.append(end - start)
            pos = end
        if pos < size:
            runs.append(size - pos)
        if not runs:
            runs = [size]
        return cls(width, height, tuple(runs))

    def to_array(self) -> np.ndarray:
        """Decode to a (height, width) bool array."""
        flat = np.zeros(self.width * self.height, dtype=bool)
        for start, end in self.foreground_intervals():
            flat[start:end] = True
        return flat.reshape(self.height, self.width)

    def foreground_intervals(self) -> list[tuple[int, int]]:
        """Foreground runs as [start, end) intervals over the linear index."""
        out = []
        pos = 0
        for i, r in enumerate(self.runs):
            if i % 2 == 1 and r > 0:
                out.append((pos, pos + r))
            pos += r
        return out

    @property
    def area(self) -> int:
        return sum(self.runs[1::2])

    @property
    def is_empty(self) -> bool:
        return self.area == 0

    def row_segments(self):
        """Yield (y, x_start, x_end_inclusive) for every foreground row span."""
        w = self.width
        for start, end in self.foreground_intervals():
            pos = start
            while pos < end:
                y = pos // w
                x0 = pos % w
                row_end = min(end, (y + 1) * w)
                yield y, x0, x0 + (row_end - pos) - 1
                pos = row_end

    def pixels(self) -> list[PixelPoint]:
        """All foreground pixels, row-major order."""
        pts = []
        for y, x0, x1 in self.row_segments():
            pts.extend(PixelPoint(x, y) for x in range(x0, x1 + 1))
        return pts


def area(m: BinaryMask) -> int:
    """Number of foreground pixels."""
    return m.area


def _require_same_shape(a: BinaryMask, b: BinaryMask) -> None:
    if a.width != b.width or a.height != b.height:
        raise MaskError(
            f"mask shape mismatch: {a.width}x{a.height} vs {b.width}x{b.height}"
        )


def intersection_area(a: BinaryMask, b: BinaryMask) -> int:
    """Exact overlap pixel count via a merge walk over run intervals."""
    _require_same_shape(a, b)
    ia = a.foreground_intervals()
    ib = b.foreground_intervals()
    total = 0
    i = j = 0
    while i < len(ia) and j < len(ib):
        s = max(ia[i][0], ib[j][0])
        e = min(ia[i][1], ib[j][1])
        if e > s:
            total += e - s
        if ia[i][1] <= ib[j][1]:
            i += 1
        else:
            j += 1
    return total


def iou(a: BinaryMask, b: BinaryMask) -> float:
    """Intersection over union; 0.0 when both masks are empty."""
    _require_same_shape(a, b)
    inter = intersection_area(a, b)
    union = a.area + b.area - inter
    if union == 0:
        return 0.0
    return inter / union


def dice(a: BinaryMask, b: BinaryMask) -> float:
    """Dice overlap 2|A∩B| / (|A|+|B|); 1.0 when both masks are empty."""
    _require_same_shape(a, b)
    denom = a.area + b.area
    if denom == 0:
        return 1.0
    return 2.0 * intersection_area(a, b) / denom


def centroid(m: BinaryMask) -> RealPoint:
    """Mean foreground coordinate, exact up to the final division."""
    n = m.area
    if n == 0:
        raise MaskError("empty mask has no centroid")
    sum_x = 0
    sum_y = 0
    for y, x0, x1 in m.row_segments():
        cnt = x1 - x0 + 1
        sum_x += (x0 + x1) * cnt // 2
        sum_y += y * cnt
    return RealPoint(sum_x / n, sum_y / n)


def bbox(m: BinaryMask) -> BoundingBox:
    """Tight inclusive bounding box of the foreground."""
    if m.is_empty:
        raise MaskError("empty mask has no bounding box")
    x_min = m.width
    x_max = -1
    y_min = m.height
    y_max = -1
    for y, x0, x1 in m.row_segments():
        x_min = min(x_min, x0)
        x_max = max(x_max, x1)
        y_min = min(y_min, y)
        y_max = max(y_max, y)
    return BoundingBox(x_min, y_min, x_max, y_max)


def union_all(masks: Sequence[BinaryMask], width: int, height: int) -> BinaryMask:
    """Union an arbitrary number of same-shape masks into one."""
    for m in masks:
        if m.width != width or m.height != height:
            raise MaskError("union over masks of differing shapes")
    if not masks:
        return BinaryMask.empty(width, height)
    merged: list[tuple[int, int]] = []
    for start, end in heapq.merge(*(m.foreground_intervals() for m in masks)):
        if merged and start <= merged[-1][1]:
            if end > merged[-1][1]:
                merged[-1] = (merged[-1][0], end)
        else:
            merged.append((start, end))
    return BinaryMask.from_intervals(width, height, merged)


def mask_to_text(m: BinaryMask) -> str:
    """Canonical text form: ``width height r0 r1 r2 ...``."""
    return " ".join([str(m.width), str(m.height), *map(str, m.runs)])


def mask_from_text(text: str) -> BinaryMask:
    """Parse the canonical text form, validating every invariant."""
    parts = text.split()
    if len(parts) < 3:
        raise MaskError(f"mask text needs width, height and runs: {text!r}")
    try:
        values = [int(p) for p in parts]
    except ValueError as exc:
        raise MaskError(f"non-integer token in mask text: {exc}") from None
    return BinaryMask(values[0], values[1], tuple(values[2:]))
