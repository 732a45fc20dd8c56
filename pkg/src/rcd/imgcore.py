"""Image buffers, rectangles and the seeded random streams used by every transform."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import DecodeError, InvalidRange

_MASK64 = (1 << 64) - 1
_SUPPORTED_FORMATS = {"PNG", "JPEG"}


@dataclass(frozen=True, eq=False)
class ImageBuffer:
    """Immutable 8-bit RGB raster stored as a ``(height, width, 3)`` uint8 array."""

    pixels: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.pixels)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise ValueError(f"expected (height, width, 3) array, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError("image must be at least 1x1")
        if arr.dtype != np.uint8:
            if np.issubdtype(arr.dtype, np.integer) and arr.size and (arr.min() < 0 or arr.max() > 255):
                raise ValueError("channel values must lie in [0, 255]")
            arr = arr.astype(np.uint8)
        arr = np.array(arr, dtype=np.uint8, order="C", copy=True)
        arr.setflags(write=False)
        object.__setattr__(self, "pixels", arr)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def size(self) -> tuple[int, int]:
        return self.width, self.height

    @classmethod
    def filled(cls, width: int, height: int, rgb=(0, 0, 0)) -> "ImageBuffer":
        arr = np.empty((height, width, 3), dtype=np.uint8)
        arr[...] = rgb
        return cls(arr)

    def is_gray(self) -> bool:
        p = self.pixels
        return bool(np.array_equal(p[..., 0], p[..., 1]) and np.array_equal(p[..., 1], p[..., 2]))

    def __eq__(self, other):
        if not isinstance(other, ImageBuffer):
            return NotImplemented
        return np.array_equal(self.pixels, other.pixels)

    def __hash__(self):
        return hash((self.pixels.shape, self.pixels.tobytes()))

    def __repr__(self):
        return f"ImageBuffer(width={self.width}, height={self.height})"


@dataclass(frozen=True)
class RectRegion:
    """Integer rectangle with top-left corner ``(x, y)``."""

    x: int
    y: int
    w: int
    h: int

    def __post_init__(self):
        if self.x < 0 or self.y < 0:
            raise ValueError(f"negative offset in {self}")
        if self.w < 1 or self.h < 1:
            raise ValueError(f"empty rectangle {self}")

    def fits(self, width: int, height: int) -> bool:
        return self.x + self.w <= width and self.y + self.h <= height

    def bind(self, img: ImageBuffer) -> "RectRegion":
        if not self.fits(img.width, img.height):
            raise ValueError(f"{self} exceeds {img.width}x{img.height} image")
        return self

    @property
    def area(self) -> int:
        return self.w * self.h

    @property
    def slices(self) -> tuple[slice, slice]:
        """Row and column slices for indexing a ``(height, width, ...)`` array."""
        return slice(self.y, self.y + self.h), slice(self.x, self.x + self.w)

    def as_list(self) -> list[int]:
        return [self.x, self.y, self.w, self.h]


class RngStream:
    """Seeded PCG64 stream addressed by ``(seed, domain, stream)``.

    Streams with different ``stream`` ids are statistically independent, so
    per-image streams (stream id = corpus index) give results that do not
    depend on processing order or thread count. Uniform variates are built
    from raw 64-bit outputs here rather than through ``Generator`` methods so
    the mapping from seed to values is fixed by this module alone.
    """

    def __init__(self, seed: int, stream: int = 0, domain: int = 0):
        self.seed = int(seed) & _MASK64
        self.stream = int(stream)
        self.domain = int(domain)
        if self.stream < 0 or self.domain < 0:
            raise ValueError("stream and domain ids must be non-negative")
        seq = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.domain, self.stream))
        self._bitgen = np.random.PCG64(seq)
        self.draws = 0

    def split(self, stream: int, domain: int | None = None) -> "RngStream":
        return RngStream(self.seed, stream, self.domain if domain is None else domain)

    def next_u64(self) -> int:
        self.draws += 1
        return int(self._bitgen.random_raw())

    def random(self) -> float:
        """Uniform double in [0, 1) with 53 bits of resolution."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def uniform(self, lo: float, hi: float) -> float:
        if not lo < hi:
            raise InvalidRange(f"need lo < hi, got [{lo}, {hi})")
        x = lo + (hi - lo) * self.random()
        # lo + (hi-lo)*u can round up to hi
        return x if x < hi else math.nextafter(hi, lo)

    def randint(self, lo: int, hi: int) -> int:
        """Integer in [lo, hi) by 64-bit multiply-shift."""
        n = hi - lo
        if n < 1:
            raise InvalidRange(f"need lo < hi, got [{lo}, {hi})")
        return lo + ((self.next_u64() * n) >> 64)

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randint(0, i + 1)
            items[i], items[j] = items[j], items[i]

    def sample(self, items, k: int) -> list:
        """``k`` distinct items in draw order (partial Fisher-Yates)."""
        pool = list(items)
        if not 0 <= k <= len(pool):
            raise ValueError(f"cannot draw {k} from {len(pool)} items")
        for i in range(k):
            j = self.randint(i, len(pool))
            pool[i], pool[j] = pool[j], pool[i]
        return pool[:k]

    def generator(self) -> np.random.Generator:
        """NumPy generator sharing this stream's bit generator, for bulk draws."""
        return np.random.Generator(self._bitgen)

    def __repr__(self):
        return f"RngStream(seed={self.seed}, stream={self.stream}, domain={self.domain}, draws={self.draws})"


def rand_uniform(rng: RngStream, lo: float, hi: float) -> float:
    return rng.uniform(lo, hi)


def load_image(path) -> ImageBuffer:
    path = Path(path)
    # open() raises FileNotFoundError / IsADirectoryError / PermissionError before decoding starts
    with open(path, "rb") as fh:
        try:
            with Image.open(fh) as im:
                if im.format not in _SUPPORTED_FORMATS:
                    raise DecodeError(f"{path}: unsupported format {im.format}")
                arr = np.asarray(im.convert("RGB"))
        except (UnidentifiedImageError, OSError, SyntaxError, ValueError) as exc:
            if isinstance(exc, DecodeError):
                raise
            raise DecodeError(f"{path}: {exc}") from exc
    return ImageBuffer(arr)


def save_image(img: ImageBuffer, path) -> None:
    """Write ``img``; format follows the suffix (``.jpg``/``.jpeg`` -> JPEG, else PNG)."""
    path = Path(path)
    im = Image.fromarray(np.asarray(img.pixels))
    if path.suffix.lower() in (".jpg", ".jpeg"):
        im.save(path, format="JPEG", quality=95)
    else:
        im.save(path, format="PNG")
