"""Random color dropout augmentation, PK sampling, ReID losses/evaluation and ensemble analysis."""

from .imgcore import ImageBuffer, RectRegion, RngStream, load_image, rand_uniform, save_image
from .transforms import (
    AugmentConfig,
    TransformOutcome,
    ggt,
    gst,
    lgt,
    lst,
    rcd,
    sample_rect,
    to_grayscale,
    to_sketch,
)

__all__ = [
    "AugmentConfig",
    "ImageBuffer",
    "RectRegion",
    "RngStream",
    "TransformOutcome",
    "ggt",
    "gst",
    "lgt",
    "load_image",
    "lst",
    "rand_uniform",
    "rcd",
    "sample_rect",
    "save_image",
    "to_grayscale",
    "to_sketch",
]
