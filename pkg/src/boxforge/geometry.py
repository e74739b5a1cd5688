"""Bounding-box algebra: normalized/pixel conversion, IoU, letterboxing, crop remapping.

All boxes here are real-valued; rounding to integer pixels happens only at
raster-crop time in the crop pipeline, which keeps the small-box rounding
pathology confined to one place.
"""
from __future__ import annotations

from dataclasses import dataclass

from .errors import DegenerateBoxError, InvalidBoxError
from .labels import ImageDims, NormalizedBox


@dataclass(frozen=True)
class PixelBox:
    """Axis-aligned box in pixel coordinates, corners (x_min, y_min)-(x_max, y_max)."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float
    class_id: int = 0

    def __post_init__(self):
        if self.class_id < 0:
            raise InvalidBoxError(f"class_id must be non-negative, got {self.class_id}")
        if min(self.x_min, self.y_min, self.x_max, self.y_max) < 0:
            raise InvalidBoxError("pixel coordinates must be non-negative")
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise DegenerateBoxError(
                f"degenerate box ({self.x_min}, {self.y_min}, {self.x_max}, {self.y_max})"
            )

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    def area(self) -> float:
        return self.width * self.height


@dataclass(frozen=True)
class LetterboxTransform:
    """Scale-then-pad mapping of a source image into a square target frame."""

    scale: float
    pad_x: float
    pad_y: float
    target_side: int

    def __post_init__(self):
        if self.scale <= 0:
            raise InvalidBoxError(f"scale must be positive, got {self.scale}")
        if self.pad_x < 0 or self.pad_y < 0:
            raise InvalidBoxError("padding must be non-negative")
        if min(self.pad_x, self.pad_y) != 0:
            raise InvalidBoxError("padding allowed on at most one axis")
        if self.target_side < 1:
            raise InvalidBoxError(f"target side must be >= 1, got {self.target_side}")

    def padded_pixel_count(self, src: ImageDims) -> int:
        """Pixels of the target frame not covered by scaled image content."""
        sw = round(self.scale * src.width_px)
        sh = round(self.scale * src.height_px)
        return self.target_side * self.target_side - sw * sh


def to_pixel(box: NormalizedBox, dims: ImageDims) -> PixelBox:
    """Express a normalized box in the pixel frame, clamped to image bounds."""
    w, h = dims.width_px, dims.height_px
    return PixelBox(
        max(0.0, box.x_min * w),
        max(0.0, box.y_min * h),
        min(float(w), box.x_max * w),
        min(float(h), box.y_max * h),
        box.class_id,
    )


def to_normalized(box: PixelBox, dims: ImageDims) -> NormalizedBox:
    """Inverse of to_pixel; rejects boxes that clamp away to nothing."""
    w, h = dims.width_px, dims.height_px
    x_min, x_max = max(0.0, box.x_min), min(float(w), box.x_max)
    y_min, y_max = max(0.0, box.y_min), min(float(h), box.y_max)
    if x_max - x_min <= 0 or y_max - y_min <= 0:
        raise DegenerateBoxError("box has zero area inside the image frame")
    return NormalizedBox(
        box.class_id,
        (x_min + x_max) / 2 / w,
        (y_min + y_max) / 2 / h,
        (x_max - x_min) / w,
        (y_max - y_min) / h,
    )


def iou_extents(
    ax0: float, ay0: float, ax1: float, ay1: float,
    bx0: float, by0: float, bx1: float, by1: float,
) -> float:
    """IoU of two corner-form boxes; 0 when disjoint."""
    iw = min(ax1, bx1) - max(ax0, bx0)
    ih = min(ay1, by1) - max(ay0, by0)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    union = (ax1 - ax0) * (ay1 - ay0) + (bx1 - bx0) * (by1 - by0) - inter
    return inter / union


def iou(a: PixelBox, b: PixelBox) -> float:
    return iou_extents(
        a.x_min, a.y_min, a.x_max, a.y_max, b.x_min, b.y_min, b.x_max, b.y_max
    )


def letterbox(dims: ImageDims, target_side: int) -> LetterboxTransform:
    """Fit an image into a square frame: scale by the long side, pad the short one.

    Padding is centered and lands on exactly one axis (none for square input),
    which is what makes a square input frame waste the fewest pixels on
    arbitrary-orientation sources.
    """
    if target_side < 1:
        raise InvalidBoxError(f"target side must be >= 1, got {target_side}")
    w, h = dims.width_px, dims.height_px
    scale = target_side / max(w, h)
    if w >= h:
        pad_x = 0.0
        pad_y = max(0.0, (target_side - scale * h) / 2)
    else:
        pad_x = max(0.0, (target_side - scale * w) / 2)
        pad_y = 0.0
    return LetterboxTransform(scale, pad_x, pad_y, target_side)


def apply_letterbox(box: NormalizedBox, src: ImageDims, t: LetterboxTransform) -> PixelBox:
    """Map a normalized source-frame box into target-frame pixels."""
    p = to_pixel(box, src)
    return PixelBox(
        p.x_min * t.scale + t.pad_x,
        p.y_min * t.scale + t.pad_y,
        p.x_max * t.scale + t.pad_x,
        p.y_max * t.scale + t.pad_y,
        box.class_id,
    )


def invert_letterbox(box: PixelBox, t: LetterboxTransform) -> PixelBox:
    """Map a target-frame pixel box back into source-frame pixels."""
    return PixelBox(
        max(0.0, (box.x_min - t.pad_x) / t.scale),
        max(0.0, (box.y_min - t.pad_y) / t.scale),
        (box.x_max - t.pad_x) / t.scale,
        (box.y_max - t.pad_y) / t.scale,
        box.class_id,
    )


def remap_into_crop(
    box: NormalizedBox,
    crop: PixelBox,
    src: ImageDims,
    min_visibility: float,
) -> NormalizedBox | None:
    """Re-express a source-frame box inside a crop region, or drop it.

    The box is intersected with the crop; when the visible fraction of its
    area falls below min_visibility the box is dropped (None). Survivors are
    renormalized in the crop's own frame, so their relative size can only
    grow relative to the full image.
    """
    if not (0.0 <= min_visibility <= 1.0):
        raise InvalidBoxError(f"min_visibility must be in [0, 1], got {min_visibility}")
    if crop.x_max > src.width_px or crop.y_max > src.height_px:
        raise InvalidBoxError("crop region exceeds the source image bounds")
    p = to_pixel(box, src)
    ix0, ix1 = max(p.x_min, crop.x_min), min(p.x_max, crop.x_max)
    iy0, iy1 = max(p.y_min, crop.y_min), min(p.y_max, crop.y_max)
    iw, ih = ix1 - ix0, iy1 - iy0
    if iw <= 0 or ih <= 0:
        return None
    visibility = (iw * ih) / p.area()
    if visibility < min_visibility:
        return None
    cw, ch = crop.width, crop.height
    return NormalizedBox(
        box.class_id,
        ((ix0 + ix1) / 2 - crop.x_min) / cw,
        ((iy0 + iy1) / 2 - crop.y_min) / ch,
        iw / cw,
        ih / ch,
    )
