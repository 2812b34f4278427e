"""Model backends: mask generation, prompt scoring, mask propagation.

The bridge owns no algorithmic decisions; it only adapts whatever models
are plugged in here to the candidate/track wire formats. The shipped
"luminance" backend is a deterministic model-free stand-in (threshold +
connected components, feature-based pseudo-scores, IOU-chained
propagation) so the whole toolchain runs and round-trips without any
weights. Swap in real segmenter/scorer/tracker wrappers by implementing
the three base classes.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage

EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)


class MaskGenerator:
    """Proposes masks for every salient object in one frame."""

    def generate(self, frame: np.ndarray) -> list[np.ndarray]:
        raise NotImplementedError


class PromptScorer:
    """Assigns each mask a probability per text prompt."""

    def score(self, frame: np.ndarray, mask: np.ndarray,
              prompts: list[str]) -> dict[str, float]:
        raise NotImplementedError


class MaskPropagator:
    """Tracks one seed mask across the whole clip, both directions."""

    def propagate(self, frames, origin_frame: int,
                  mask: np.ndarray) -> dict[int, np.ndarray]:
        raise NotImplementedError


def _segment(frame: np.ndarray, min_area: int) -> list[np.ndarray]:
    threshold = frame.mean() + frame.std()
    binary = frame > max(threshold, 1e-6)
    labels, count = ndimage.label(binary, structure=EIGHT_CONNECTED)
    masks = []
    for label in range(1, count + 1):
        mask = labels == label
        if mask.sum() >= min_area:
            masks.append(mask)
    # deterministic order: by first foreground pixel in row-major order
    masks.sort(key=lambda m: int(np.flatnonzero(m.ravel())[0]))
    return masks


def _iou(a: np.ndarray, b: np.ndarray) -> float:
    union = np.logical_or(a, b).sum()
    if union == 0:
        return 0.0
    return float(np.logical_and(a, b).sum() / union)


class LuminanceMaskGenerator(MaskGenerator):
    def __init__(self, min_area: int = 20):
        self.min_area = min_area

    def generate(self, frame: np.ndarray) -> list[np.ndarray]:
        return _segment(frame, self.min_area)


class FeatureScorer(PromptScorer):
    """Deterministic pseudo-probabilities from blob geometry.

    The first prompt is treated as the target class; its score grows
    with blob area through a logistic squash, and the remainder is
    spread evenly over the other prompts. A stand-in for a real
    vision-language scorer, useful because it is reproducible.
    """

    def __init__(self, area_midpoint: float = 150.0, area_scale: float = 40.0):
        self.area_midpoint = area_midpoint
        self.area_scale = area_scale

    def score(self, frame: np.ndarray, mask: np.ndarray,
              prompts: list[str]) -> dict[str, float]:
        if not prompts:
            raise ValueError("at least one prompt is required")
        area = float(mask.sum())
        target = 1.0 / (1.0 + np.exp(-(area - self.area_midpoint) / self.area_scale))
        target = float(np.clip(target, 0.0, 0.999))
        scores = {prompts[0]: target}
        rest = (1.0 - target) / max(len(prompts) - 1, 1)
        for prompt in prompts[1:]:
            scores[prompt] = rest
        return scores


class IouChainPropagator(MaskPropagator):
    """Greedy frame-to-frame propagation by best-overlap component."""

    def __init__(self, min_area: int = 20, min_iou: float = 0.2):
        self.min_area = min_area
        self.min_iou = min_iou

    def _step(self, frame: np.ndarray, reference: np.ndarray):
        best = None
        best_iou = self.min_iou
        for mask in _segment(frame, self.min_area):
            v = _iou(mask, reference)
            if v > best_iou:
                best = mask
                best_iou = v
        return best

    def propagate(self, frames, origin_frame: int,
                  mask: np.ndarray) -> dict[int, np.ndarray]:
        if not 0 <= origin_frame < len(frames):
            raise ValueError(f"origin frame {origin_frame} outside the clip")
        track = {origin_frame: mask.astype(bool)}
        reference = track[origin_frame]
        for f in range(origin_frame + 1, len(frames)):
            found = self._step(frames[f], reference)
            if found is None:
                continue  # lost: frame omitted, keep looking from last hit
            track[f] = found
            reference = found
        reference = track[origin_frame]
        for f in range(origin_frame - 1, -1, -1):
            found = self._step(frames[f], reference)
            if found is None:
                continue
            track[f] = found
            reference = found
        return track


def default_backend(
    device: str = "cpu",
) -> tuple[MaskGenerator, PromptScorer, MaskPropagator]:
    """The model-free reference backend; ``device`` exists for parity with
    real model backends and is ignored here."""
    del device
    return LuminanceMaskGenerator(), FeatureScorer(), IouChainPropagator()
