"""Boxes, binary masks, the RLE codec, and IoU primitives.

Boxes come in two flavors.  Corner form ``(x1, y1, x2, y2)`` uses pure
real-interval semantics (width = x2 - x1).  Center form ``(c_x, c_y, w, h)``
is also what :func:`mask_bbox` produces, where the pixel grid makes the
width/height closed-interval counts (w = max - min + 1).

Binary masks are boolean ``(H, W)`` numpy arrays; pixel (x, y) lives at
``mask[y, x]``.  RLE is the uncompressed COCO-style form: column-major
integer run lengths of alternating 0/1 runs, starting with the 0-run.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class CorruptRleError(ValueError):
    """RLE counts are inconsistent with the declared mask size."""


class MaskShapeError(ValueError):
    """Two masks with different dimensions were combined."""


class EmptyMaskError(ValueError):
    """An operation that needs set pixels received an empty mask."""


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box in corner form, image-frame pixel coordinates."""

    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self):
        vals = (self.x1, self.y1, self.x2, self.y2)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError(f"non-finite box coordinates: {vals}")
        if self.x1 > self.x2 or self.y1 > self.y2:
            raise ValueError(f"inverted box corners: {vals}")

    @property
    def width(self) -> float:
        return self.x2 - self.x1

    @property
    def height(self) -> float:
        return self.y2 - self.y1

    @property
    def area(self) -> float:
        return self.width * self.height

    def to_cwh(self) -> "BBoxCwh":
        return BBoxCwh(
            c_x=(self.x1 + self.x2) / 2.0,
            c_y=(self.y1 + self.y2) / 2.0,
            w=self.width,
            h=self.height,
        )

    def translated(self, dx: float, dy: float) -> "BBox":
        return BBox(self.x1 + dx, self.y1 + dy, self.x2 + dx, self.y2 + dy)

    def scaled(self, s: float) -> "BBox":
        return BBox(self.x1 * s, self.y1 * s, self.x2 * s, self.y2 * s)

    def as_tuple(self) -> tuple:
        return (self.x1, self.y1, self.x2, self.y2)


@dataclass(frozen=True)
class BBoxCwh:
    """Axis-aligned box in center form (c_x, c_y, w, h)."""

    c_x: float
    c_y: float
    w: float
    h: float

    def __post_init__(self):
        if self.w < 0 or self.h < 0:
            raise ValueError(f"negative box extent: w={self.w}, h={self.h}")

    def to_bbox(self) -> BBox:
        """Inverse of :meth:`BBox.to_cwh`; lossless round-trip."""
        return BBox(
            x1=self.c_x - self.w / 2.0,
            y1=self.c_y - self.h / 2.0,
            x2=self.c_x + self.w / 2.0,
            y2=self.c_y + self.h / 2.0,
        )

    def pixel_extent(self) -> BBox:
        """Real-interval box covered by the pixels of a mask-derived box.

        A mask box with min/max pixel indices covers the real interval
        [min, max + 1); with closed-interval w = max - min + 1 this is
        x1 = c_x - (w - 1)/2, x2 = x1 + w.  Using pixel extents keeps
        mask-derived boxes consistent with real-interval box IoU under
        integer rescaling of the pixel grid.
        """
        x1 = self.c_x - (self.w - 1) / 2.0
        y1 = self.c_y - (self.h - 1) / 2.0
        return BBox(x1=x1, y1=y1, x2=x1 + self.w, y2=y1 + self.h)

    def as_tuple(self) -> tuple:
        return (self.c_x, self.c_y, self.w, self.h)


@dataclass(frozen=True)
class RleMask:
    """Uncompressed column-major RLE: alternating 0/1 run lengths.

    JSON shape: ``{"size": [H, W], "counts": [int, ...]}``.
    """

    size: tuple  # (H, W)
    counts: tuple

    def __post_init__(self):
        h, w = self.size
        if any(c < 0 for c in self.counts):
            raise CorruptRleError(f"negative run length in {self.counts[:8]}...")
        if any(c == 0 for c in self.counts[1:]):
            raise CorruptRleError("zero-length run after the first count")
        if sum(self.counts) != h * w:
            raise CorruptRleError(
                f"run lengths sum to {sum(self.counts)}, expected {h * w}"
            )

    def to_json(self) -> dict:
        return {"size": [int(self.size[0]), int(self.size[1])], "counts": list(self.counts)}

    @classmethod
    def from_json(cls, obj: dict) -> "RleMask":
        return cls(size=tuple(obj["size"]), counts=tuple(obj["counts"]))


def iou_box(a: BBox, b: BBox) -> float:
    """Intersection over union of two corner-form boxes; 0 when the union
    is degenerate."""
    ix = min(a.x2, b.x2) - max(a.x1, b.x1)
    iy = min(a.y2, b.y2) - max(a.y1, b.y1)
    if ix <= 0 or iy <= 0:
        return 0.0
    inter = ix * iy
    union = a.area + b.area - inter
    if union <= 0:
        return 0.0
    return inter / union


def iou_mask(a: np.ndarray, b: np.ndarray) -> float:
    """Pixel IoU of two equal-sized binary masks; 0 when both are empty."""
    if a.shape != b.shape:
        raise MaskShapeError(f"mask shapes differ: {a.shape} vs {b.shape}")
    inter = np.count_nonzero(a & b)
    union = np.count_nonzero(a | b)
    if union == 0:
        return 0.0
    return inter / union


def mask_area(m: np.ndarray) -> int:
    """Number of set pixels."""
    return int(np.count_nonzero(m))


def mask_bbox(m: np.ndarray) -> BBoxCwh:
    """Tightest box around the set pixels, in center form with
    closed-interval pixel extents (w = max - min + 1)."""
    ys, xs = np.nonzero(m)
    if xs.size == 0:
        raise EmptyMaskError("mask_bbox of an empty mask")
    x_min, x_max = int(xs.min()), int(xs.max())
    y_min, y_max = int(ys.min()), int(ys.max())
    return BBoxCwh(
        c_x=(x_min + x_max) / 2.0,
        c_y=(y_min + y_max) / 2.0,
        w=float(x_max - x_min + 1),
        h=float(y_max - y_min + 1),
    )


def rle_encode(m: np.ndarray) -> RleMask:
    """Encode a binary mask as column-major RLE starting with the 0-run."""
    h, w = m.shape
    flat = np.asarray(m, dtype=np.uint8).flatten(order="F")
    if flat.size == 0:
        return RleMask(size=(h, w), counts=(0,))
    boundaries = np.flatnonzero(np.diff(flat)) + 1
    starts = np.concatenate(([0], boundaries))
    ends = np.concatenate((boundaries, [flat.size]))
    counts = (ends - starts).tolist()
    if flat[0] == 1:
        counts = [0] + counts
    return RleMask(size=(h, w), counts=tuple(int(c) for c in counts))


def rle_decode(r: RleMask) -> np.ndarray:
    """Decode RLE back to a boolean (H, W) mask."""
    h, w = r.size
    values = np.arange(len(r.counts)) % 2  # runs alternate 0, 1, 0, ...
    flat = np.repeat(values.astype(bool), r.counts)
    return flat.reshape((h, w), order="F")
