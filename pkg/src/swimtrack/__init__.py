"""Track alignment and swimming biometrics for aerial video masks."""

__version__ = "0.1.0"

from .masks import (
    BinaryMask,
    BoundingBox,
    MaskError,
    PixelPoint,
    RealPoint,
    area,
    bbox,
    centroid,
    dice,
    iou,
    mask_from_text,
    mask_to_text,
    union_all,
)

__all__ = [
    "BinaryMask",
    "BoundingBox",
    "MaskError",
    "PixelPoint",
    "RealPoint",
    "area",
    "bbox",
    "centroid",
    "dice",
    "iou",
    "mask_from_text",
    "mask_to_text",
    "union_all",
]
