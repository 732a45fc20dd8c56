"""Random Color Dropout: grayscale/sketch conversion and the global, local and combined transforms.

Every transform is split into a *plan* step, which consumes random draws and
decides what fires and where, and a *render* step, which is pure pixel work.
The ``ggt``/``lgt``/``rcd`` entry points do both; firing-rate statistics only
need the plan.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Literal

import numpy as np

from .errors import ConfigError
from .imgcore import ImageBuffer, RectRegion, RngStream

Mode = Literal["grayscale", "sketch"]
Kind = Literal["none", "global", "local", "global+local"]

# BT.601 luma weights scaled by 1000 so conversion stays in integer arithmetic
_LUMA_WEIGHTS = np.array([299, 587, 114], dtype=np.int64)


@dataclass(frozen=True)
class AugmentConfig:
    """Knobs for the color-dropout transforms.

    ``combine=True`` runs the global transform first and the local one only if
    the global draw did not fire. ``combine=False`` draws both independently
    and applies the local transform on top of the global output, so both may
    fire on the same image.
    """

    p: float = 0.05
    p_r: float = 0.4
    s_l: float = 0.02
    s_h: float = 0.4
    r_1: float = 0.3
    r_2: float = 1 / 0.3
    mode: Mode = "grayscale"
    combine: bool = True
    retry_cap: int = 100
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ConfigError(f"p must be in [0, 1], got {self.p}")
        if not 0.0 <= self.p_r <= 1.0:
            raise ConfigError(f"p_r must be in [0, 1], got {self.p_r}")
        if not 0.0 < self.s_l <= self.s_h < 1.0:
            raise ConfigError(f"need 0 < s_l <= s_h < 1, got s_l={self.s_l}, s_h={self.s_h}")
        if not 0.0 < self.r_1 <= self.r_2:
            raise ConfigError(f"need 0 < r_1 <= r_2, got r_1={self.r_1}, r_2={self.r_2}")
        if self.mode not in ("grayscale", "sketch"):
            raise ConfigError(f"mode must be 'grayscale' or 'sketch', got {self.mode!r}")
        if self.retry_cap < 1:
            raise ConfigError(f"retry_cap must be >= 1, got {self.retry_cap}")

    def with_(self, **changes) -> "AugmentConfig":
        return replace(self, **changes)

    @property
    def any_fire_probability(self) -> float:
        """Probability that the combined transform changes an image (ignoring sampler exhaustion)."""
        if self.combine:
            return self.p + (1.0 - self.p) * self.p_r
        return 1.0 - (1.0 - self.p) * (1.0 - self.p_r)


PRESETS = {
    "default": AugmentConfig(),
    "sketch-finetune": AugmentConfig(p=0.05, p_r=0.7, mode="sketch"),
}


@dataclass(frozen=True)
class TransformOutcome:
    image: ImageBuffer
    applied: bool
    region: RectRegion | None = None
    kind: Kind = "none"

    def __post_init__(self):
        if self.region is not None and "local" not in self.kind:
            raise ValueError("region set on a non-local outcome")
        if self.applied != (self.kind != "none"):
            raise ValueError(f"applied={self.applied} inconsistent with kind={self.kind!r}")


@dataclass(frozen=True)
class Plan:
    """Random decisions for one image: whether the global transform fires and the local rectangle, if any."""

    global_fired: bool = False
    region: RectRegion | None = None

    @property
    def kind(self) -> Kind:
        if self.global_fired and self.region is not None:
            return "global+local"
        if self.global_fired:
            return "global"
        if self.region is not None:
            return "local"
        return "none"


# --- conversions -------------------------------------------------------------


def luma(pixels: np.ndarray) -> np.ndarray:
    """Round-half-up BT.601 luma of an ``(..., 3)`` uint8 array, as uint8."""
    acc = pixels.astype(np.int64) @ _LUMA_WEIGHTS
    return np.minimum((acc + 500) // 1000, 255).astype(np.uint8)


def _replicate(channel: np.ndarray) -> np.ndarray:
    return np.repeat(channel[..., None], 3, axis=-1)


def to_grayscale(img: ImageBuffer) -> ImageBuffer:
    return ImageBuffer(_replicate(luma(img.pixels)))


def sobel_magnitude(gray: np.ndarray) -> np.ndarray:
    """3x3 Sobel gradient magnitude with edge-replicated borders."""
    g = np.pad(gray.astype(np.float64), 1, mode="edge")
    # correlation taps: rows/cols offset by -1, 0, +1
    top, mid, bot = g[:-2], g[1:-1], g[2:]
    gx = (top[:, 2:] + 2 * mid[:, 2:] + bot[:, 2:]) - (top[:, :-2] + 2 * mid[:, :-2] + bot[:, :-2])
    left, centre, right = g[:, :-2], g[:, 1:-1], g[:, 2:]
    gy = (left[2:] + 2 * centre[2:] + right[2:]) - (left[:-2] + 2 * centre[:-2] + right[:-2])
    return np.hypot(gx, gy)


def to_sketch(img: ImageBuffer) -> ImageBuffer:
    """Dark-on-light edge drawing: inverted, max-normalized Sobel magnitude of the luma."""
    mag = sobel_magnitude(luma(img.pixels))
    peak = mag.max()
    if peak == 0:
        edges = np.zeros(mag.shape, dtype=np.uint8)
    else:
        edges = np.floor(mag * (255.0 / peak) + 0.5).clip(0, 255).astype(np.uint8)
    return ImageBuffer(_replicate(255 - edges))


def convert(img: ImageBuffer, mode: Mode) -> ImageBuffer:
    if mode == "grayscale":
        return to_grayscale(img)
    if mode == "sketch":
        return to_sketch(img)
    raise ConfigError(f"unknown mode {mode!r}")


# --- planning ----------------------------------------------------------------


def _draw(rng: RngStream, lo: float, hi: float) -> float:
    # degenerate ranges (s_l == s_h, r_1 == r_2) still consume one draw
    if lo == hi:
        rng.random()
        return lo
    return rng.uniform(lo, hi)


def _round_side(x: float) -> int:
    return max(1, math.floor(x + 0.5))


def sample_rect(w: int, h: int, cfg: AugmentConfig, rng: RngStream) -> RectRegion | None:
    """Rejection-sample a rectangle of random area ratio and aspect inside a ``w`` x ``h`` image.

    Each attempt draws, in order: area fraction, aspect ratio ``h/w``, column
    offset, row offset. Returns ``None`` after ``cfg.retry_cap`` failed attempts.
    """
    if w < 1 or h < 1:
        raise ValueError(f"image dimensions must be >= 1, got {w}x{h}")
    area = w * h
    for _ in range(cfg.retry_cap):
        target = _draw(rng, cfg.s_l, cfg.s_h) * area
        aspect = _draw(rng, cfg.r_1, cfg.r_2)
        rh = _round_side(math.sqrt(target * aspect))
        rw = _round_side(math.sqrt(target / aspect))
        x = rng.randint(0, w)
        y = rng.randint(0, h)
        if x + rw <= w and y + rh <= h:
            return RectRegion(x, y, rw, rh)
    return None


def fires(prob: float, rng: RngStream) -> bool:
    """One Bernoulli decision: draw u in [0, 1); the transform fires iff ``u < prob``."""
    return rng.random() < prob


def plan_global(cfg: AugmentConfig, rng: RngStream) -> Plan:
    return Plan(global_fired=fires(cfg.p, rng))


def plan_local(w: int, h: int, cfg: AugmentConfig, rng: RngStream) -> Plan:
    if not fires(cfg.p_r, rng):
        return Plan()
    return Plan(region=sample_rect(w, h, cfg, rng))


def plan_rcd(w: int, h: int, cfg: AugmentConfig, rng: RngStream, global_fired: bool | None = None) -> Plan:
    """Plan the configured pipeline.

    ``global_fired`` overrides the global draw, for callers that make one
    global decision per batch instead of per image.
    """
    if global_fired is None:
        global_fired = fires(cfg.p, rng)
    if cfg.combine:
        if global_fired:
            return Plan(global_fired=True)
        return plan_local(w, h, cfg, rng)
    local = plan_local(w, h, cfg, rng)
    return Plan(global_fired=global_fired, region=local.region)


# --- rendering ---------------------------------------------------------------


def render(img: ImageBuffer, plan: Plan, mode: Mode) -> TransformOutcome:
    if plan.kind == "none":
        return TransformOutcome(img, applied=False)
    if plan.global_fired:
        # the local patch would come from the same converted image, so it changes nothing
        return TransformOutcome(convert(img, mode), applied=True, region=plan.region, kind=plan.kind)
    region = plan.region.bind(img)
    rows, cols = region.slices
    out = img.pixels.copy()
    if mode == "grayscale":
        # grayscale is pointwise, so only the rectangle needs converting
        out[rows, cols] = _replicate(luma(img.pixels[rows, cols]))
    else:
        out[rows, cols] = to_sketch(img).pixels[rows, cols]
    return TransformOutcome(ImageBuffer(out), applied=True, region=region, kind=plan.kind)


def ggt(img: ImageBuffer, cfg: AugmentConfig, rng: RngStream) -> TransformOutcome:
    """Global transform: convert the whole image with probability ``cfg.p``."""
    return render(img, plan_global(cfg, rng), cfg.mode)


def lgt(img: ImageBuffer, cfg: AugmentConfig, rng: RngStream) -> TransformOutcome:
    """Local transform: with probability ``cfg.p_r`` convert a random rectangle.

    Sampler exhaustion leaves the image unchanged and reports ``applied=False``.
    """
    return render(img, plan_local(img.width, img.height, cfg, rng), cfg.mode)


def rcd(img: ImageBuffer, cfg: AugmentConfig, rng: RngStream, global_fired: bool | None = None) -> TransformOutcome:
    return render(img, plan_rcd(img.width, img.height, cfg, rng, global_fired), cfg.mode)


def gst(img: ImageBuffer, cfg: AugmentConfig, rng: RngStream) -> TransformOutcome:
    return ggt(img, cfg.with_(mode="sketch"), rng)


def lst(img: ImageBuffer, cfg: AugmentConfig, rng: RngStream) -> TransformOutcome:
    return lgt(img, cfg.with_(mode="sketch"), rng)
