"""Frame access for clips stored as image directories or .npy stacks.

Real deployments decode drone video; for adapter development and tests a
clip is a sorted directory of images or a (frames, height, width) array
saved with numpy. Frames are served as float32 grayscale in [0, 1].
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff"}


class VideoError(ValueError):
    """Clip missing, empty, or undecodable."""


class FrameSource:
    def __init__(self, frames: np.ndarray, origin: str):
        if frames.ndim != 3 or frames.shape[0] == 0:
            raise VideoError(f"{origin}: no frames")
        self.frames = frames
        self.origin = origin

    def __len__(self) -> int:
        return self.frames.shape[0]

    def __getitem__(self, index: int) -> np.ndarray:
        return self.frames[index]

    @property
    def shape(self) -> tuple[int, int]:
        return self.frames.shape[1], self.frames.shape[2]


def _to_gray(arr: np.ndarray) -> np.ndarray:
    arr = np.asarray(arr, dtype=np.float32)
    if arr.ndim == 3:
        arr = arr.mean(axis=2)
    if arr.max() > 1.0:
        arr = arr / 255.0
    return arr


def load_clip(path) -> FrameSource:
    """Load a clip from a directory of images or an .npy stack."""
    p = Path(path)
    if not p.exists():
        raise VideoError(f"{p}: does not exist")
    if p.is_dir():
        files = sorted(
            f for f in p.iterdir() if f.suffix.lower() in IMAGE_SUFFIXES
        )
        if not files:
            raise VideoError(f"{p}: no image frames found")
        from PIL import Image

        frames = []
        for f in files:
            with Image.open(f) as img:
                frames.append(_to_gray(np.asarray(img)))
        shapes = {fr.shape for fr in frames}
        if len(shapes) != 1:
            raise VideoError(f"{p}: frames disagree on size: {sorted(shapes)}")
        return FrameSource(np.stack(frames), str(p))
    if p.suffix == ".npy":
        data = np.load(p)
        if data.ndim == 4:  # (T, H, W, C)
            data = data.mean(axis=3)
        if data.ndim != 3:
            raise VideoError(f"{p}: expected a (frames, height, width) array")
        stack = np.stack([_to_gray(fr) for fr in data])
        return FrameSource(stack, str(p))
    raise VideoError(f"{p}: unsupported clip format (use a frame directory or .npy)")
