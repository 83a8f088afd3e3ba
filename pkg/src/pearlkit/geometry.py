"""Exact pixel-grid geometry over binary validity masks.

Distances are measured center-to-center between integer pixel coordinates,
so every squared distance is an integer and every reported distance is the
square root of one. Ties are always broken by smallest y, then smallest x,
which makes every point-returning operation deterministic.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from PIL import Image

from . import _edt
from .errors import (
    DimensionMismatchError,
    EmptyMaskError,
    EmptyMaskListError,
    OutOfBoundsError,
    UniformMaskError,
)


class Point2D(NamedTuple):
    """Pixel coordinate; x grows rightward, y grows downward, origin top-left."""

    x: int
    y: int


class Point3D(NamedTuple):
    """Camera-space coordinate in meters."""

    x: float
    y: float
    z: float


@dataclass(frozen=True)
class BinaryMask:
    """A (height, width) boolean validity grid."""

    bits: np.ndarray

    def __post_init__(self):
        bits = np.asarray(self.bits, dtype=bool)
        if bits.ndim != 2 or bits.shape[0] < 1 or bits.shape[1] < 1:
            raise DimensionMismatchError(f"mask must be 2D non-empty, got shape {bits.shape}")
        bits.flags.writeable = False
        object.__setattr__(self, "bits", bits)

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    def count(self) -> int:
        """Number of set pixels."""
        return int(self.bits.sum())

    def contains(self, p: Point2D) -> bool:
        return 0 <= p.x < self.width and 0 <= p.y < self.height

    def pixel(self, p: Point2D) -> bool:
        if not self.contains(p):
            raise OutOfBoundsError(f"point {tuple(p)} outside {self.width}x{self.height} grid")
        return bool(self.bits[p.y, p.x])

    def to_png_bytes(self) -> bytes:
        """8-bit single-channel PNG, 255 inside / 0 outside."""
        buf = io.BytesIO()
        Image.fromarray(self.bits.astype(np.uint8) * 255).save(buf, format="PNG")
        return buf.getvalue()

    @classmethod
    def from_png_bytes(cls, data: bytes) -> "BinaryMask":
        arr = np.array(Image.open(io.BytesIO(data)))
        if arr.ndim != 2:
            raise DimensionMismatchError("mask PNG must be single-channel")
        return cls(arr > 0)


@dataclass(frozen=True)
class DistanceField:
    """Per-pixel distances stored as exact integer squared distances."""

    squared: np.ndarray  # int64 (H, W)
    values: np.ndarray = field(init=False)  # float64 sqrt of `squared`

    def __post_init__(self):
        sq = np.ascontiguousarray(self.squared, dtype=np.int64)
        sq.flags.writeable = False
        object.__setattr__(self, "squared", sq)
        vals = np.sqrt(sq.astype(np.float64))
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    @property
    def width(self) -> int:
        return self.squared.shape[1]

    @property
    def height(self) -> int:
        return self.squared.shape[0]

    def to_bytes(self) -> bytes:
        """8-byte header (width, height as little-endian uint32) + float32 grid."""
        header = struct.pack("<II", self.width, self.height)
        return header + self.values.astype("<f4").tobytes()

    @classmethod
    def from_bytes(cls, data: bytes) -> "DistanceField":
        w, h = struct.unpack("<II", data[:8])
        vals = np.frombuffer(data[8:], dtype="<f4").reshape(h, w).astype(np.float64)
        return cls(np.rint(vals * vals).astype(np.int64))


@dataclass(frozen=True)
class Heatmap:
    """Real-valued activation grid aligned with an image."""

    values: np.ndarray  # float (H, W)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim != 2 or vals.size == 0:
            raise DimensionMismatchError(f"heatmap must be 2D non-empty, got shape {vals.shape}")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]


def euclidean_distance_transform(mask: BinaryMask, target: int = 1) -> DistanceField:
    """Distance from every pixel to the nearest pixel of the class opposite `target`.

    The field is zero exactly on opposite-class pixels and grows inside the
    `target` region. Exact: the underlying squared distances are integers.

    Raises UniformMaskError when the mask holds only one class.
    """
    sites = mask.bits != bool(target)
    n_sites = int(sites.sum())
    if n_sites == 0 or n_sites == sites.size:
        raise UniformMaskError("distance transform needs both classes present")
    return DistanceField(_edt.squared_edt(sites))


def _nearest_in_class(mask: BinaryMask, p: Point2D, cls: bool) -> tuple[Point2D, int]:
    """Nearest pixel of class `cls` to p (p may lie outside the grid).

    Returns (point, squared distance); ties broken by smallest y then x.
    """
    sel = mask.bits if cls else ~mask.bits
    ys, xs = np.nonzero(sel)
    if ys.size == 0:
        raise UniformMaskError(f"mask has no pixel of class {int(cls)}")
    dx = xs.astype(np.int64) - int(p.x)
    dy = ys.astype(np.int64) - int(p.y)
    d2 = dx * dx + dy * dy
    i = int(np.argmin(d2))  # first minimum in row-major order = smallest y, then x
    return Point2D(int(xs[i]), int(ys[i])), int(d2[i])


def signed_distance(mask: BinaryMask, p: Point2D) -> float:
    """Positive depth inside the mask, negative distance outside.

    Magnitude is the exact distance to the nearest opposite-class pixel.
    """
    inside = mask.pixel(p)
    _, d2 = _nearest_in_class(mask, p, not inside)
    d = float(np.sqrt(np.float64(d2)))
    return d if inside else -d


def nearest_opposite_point(mask: BinaryMask, p: Point2D) -> Point2D:
    """The opposite-class pixel realizing |signed_distance|; smallest y then x on ties."""
    inside = mask.pixel(p)
    q, _ = _nearest_in_class(mask, p, not inside)
    return q


def distance_to_class(mask: BinaryMask, p: Point2D, cls: int) -> float:
    """Distance from p (any integer coordinates) to the nearest pixel of class `cls`."""
    _, d2 = _nearest_in_class(mask, p, bool(cls))
    return float(np.sqrt(np.float64(d2)))


def border_fallback_distance(mask: BinaryMask, p: Point2D) -> float:
    """Uniform-mask stand-in: distance to the nearest image border, plus one.

    Signed like `signed_distance`: positive when the (all-ones) mask claims
    the pixel, negative when an all-zeros mask rejects it. Keeps scores
    finite and monotone when no opposite-class pixel exists.
    """
    inside = mask.pixel(p)
    d = min(p.x, p.y, mask.width - 1 - p.x, mask.height - 1 - p.y) + 1
    return float(d) if inside else -float(d)


def innermost_point(mask: BinaryMask) -> Point2D:
    """Set pixel farthest from background, the image border counting as background.

    A mask touching the frame edge is cut there, so points right at the
    frame boundary are never preferred. Ties: smallest y, then smallest x.
    """
    if not mask.bits.any():
        raise EmptyMaskError("innermost_point needs at least one set pixel")
    padded = np.zeros((mask.height + 2, mask.width + 2), dtype=bool)
    padded[1:-1, 1:-1] = mask.bits
    d2 = _edt.squared_edt(~padded)[1:-1, 1:-1]
    scored = np.where(mask.bits, d2, -1)
    i = int(np.argmax(scored))  # first maximum in row-major order
    y, x = divmod(i, mask.width)
    return Point2D(x, y)


def bottommost_point(mask: BinaryMask) -> Point2D:
    """Set pixel with maximum y; among those, the smallest x."""
    ys, xs = np.nonzero(mask.bits)
    if ys.size == 0:
        raise EmptyMaskError("bottommost_point needs at least one set pixel")
    y_max = int(ys.max())
    x_min = int(xs[ys == y_max].min())
    return Point2D(x_min, y_max)


def argmax_point(h: Heatmap) -> Point2D:
    """Location of the maximum activation; ties broken by smallest y then x."""
    i = int(np.argmax(h.values))
    y, x = divmod(i, h.width)
    return Point2D(x, y)


def mask_union(masks: list[BinaryMask]) -> BinaryMask:
    """Pixelwise OR of masks sharing one grid size."""
    if not masks:
        raise EmptyMaskListError("mask_union needs at least one mask")
    shape = masks[0].bits.shape
    for m in masks[1:]:
        if m.bits.shape != shape:
            raise DimensionMismatchError(
                f"mask shapes differ: {m.bits.shape} vs {shape}"
            )
    out = np.zeros(shape, dtype=bool)
    for m in masks:
        out |= m.bits
    return BinaryMask(out)
