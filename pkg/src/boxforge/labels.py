"""YOLO-format label files: parsing, serialization, and dataset indexing.

A label file is plain text next to its image, one object per line:

    <class> <cx> <cy> <w> <h>

with center and size expressed as fractions of the image dimensions. An
existing-but-empty label file marks a reviewed negative image; a missing
file marks an image nobody has looked at yet. The two must never be
conflated, so indexing keeps three states: labeled, negative, unlabeled.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Literal

from PIL import Image

from .errors import DatasetError, InvalidBoxError, LabelFormatError, LabelParseError

# Slack on the box-extent check; exactly covers 6-decimal rounding drift.
EXTENT_EPS = 1e-6

# Smallest size that still prints as a nonzero 6-decimal value.
_MIN_SERIALIZABLE = 5e-7

DEFAULT_IMAGE_EXTENSIONS = frozenset({"jpg", "jpeg", "png"})

LabelState = Literal["labeled", "negative", "unlabeled"]


@dataclass(frozen=True)
class NormalizedBox:
    """One labeled object in image-relative coordinates."""

    class_id: int
    cx: float
    cy: float
    w: float
    h: float

    def __post_init__(self):
        if self.class_id < 0:
            raise InvalidBoxError(f"class_id must be non-negative, got {self.class_id}")
        for name, v in (("cx", self.cx), ("cy", self.cy), ("w", self.w), ("h", self.h)):
            if not math.isfinite(v):
                raise InvalidBoxError(f"{name} must be finite, got {v}")
        if not (0.0 <= self.cx <= 1.0 and 0.0 <= self.cy <= 1.0):
            raise InvalidBoxError(f"center ({self.cx}, {self.cy}) outside [0, 1]")
        if not (0.0 < self.w <= 1.0 and 0.0 < self.h <= 1.0):
            raise InvalidBoxError(f"size ({self.w}, {self.h}) outside (0, 1]")
        if self.x_min < -EXTENT_EPS or self.x_max > 1.0 + EXTENT_EPS:
            raise InvalidBoxError(f"x extent [{self.x_min}, {self.x_max}] leaves the frame")
        if self.y_min < -EXTENT_EPS or self.y_max > 1.0 + EXTENT_EPS:
            raise InvalidBoxError(f"y extent [{self.y_min}, {self.y_max}] leaves the frame")

    @property
    def x_min(self) -> float:
        return self.cx - self.w / 2

    @property
    def x_max(self) -> float:
        return self.cx + self.w / 2

    @property
    def y_min(self) -> float:
        return self.cy - self.h / 2

    @property
    def y_max(self) -> float:
        return self.cy + self.h / 2

    def area(self) -> float:
        return self.w * self.h


@dataclass(frozen=True)
class ImageDims:
    """Pixel dimensions of an image."""

    width_px: int
    height_px: int

    def __post_init__(self):
        if self.width_px < 1 or self.height_px < 1:
            raise InvalidBoxError(
                f"dimensions must be positive, got {self.width_px}x{self.height_px}"
            )


@dataclass(frozen=True)
class LabeledImage:
    """One image of a dataset with its parsed labels and review state."""

    image_id: str
    dims: ImageDims
    boxes: tuple[NormalizedBox, ...]
    label_state: LabelState
    image_path: Path

    def __post_init__(self):
        if self.label_state == "labeled" and not self.boxes:
            raise DatasetError(f"{self.image_id}: labeled entry without boxes")
        if self.label_state in ("negative", "unlabeled") and self.boxes:
            raise DatasetError(f"{self.image_id}: {self.label_state} entry carries boxes")


class DatasetIndex:
    """Image/label pairing of a dataset root, ordered by image id."""

    def __init__(self, root: Path, entries: Iterable[LabeledImage], orphans: Iterable[Path] = ()):
        self.root = Path(root)
        self.entries: tuple[LabeledImage, ...] = tuple(
            sorted(entries, key=lambda e: e.image_id)
        )
        self.orphans: tuple[Path, ...] = tuple(sorted(orphans))
        self._by_id: dict[str, LabeledImage] = {}
        for e in self.entries:
            if e.image_id in self._by_id:
                raise DatasetError(f"duplicate image id {e.image_id!r}")
            self._by_id[e.image_id] = e

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, image_id: str) -> bool:
        return image_id in self._by_id

    def entry(self, image_id: str) -> LabeledImage:
        try:
            return self._by_id[image_id]
        except KeyError:
            raise DatasetError(f"unknown image id {image_id!r}") from None

    def counts(self) -> dict[str, int]:
        out = {"labeled": 0, "negative": 0, "unlabeled": 0}
        for e in self.entries:
            out[e.label_state] += 1
        return out

    def dims_map(self) -> dict[str, ImageDims]:
        return {e.image_id: e.dims for e in self.entries}

    def boxes_map(self) -> dict[str, list[NormalizedBox]]:
        """Ground-truth boxes per labeled/negative image (unlabeled excluded)."""
        return {
            e.image_id: list(e.boxes)
            for e in self.entries
            if e.label_state != "unlabeled"
        }


@dataclass(frozen=True)
class ClampNote:
    """Record of one lenient-mode coordinate fix."""

    line: int
    field: str
    original: float
    clamped: float


def parse_label_file(
    text: str,
    strict: bool = True,
    clamp_notes: list[ClampNote] | None = None,
) -> list[NormalizedBox]:
    """Parse the contents of one label file into boxes.

    Strict mode rejects any out-of-range value. Lenient mode clamps centers
    and sizes into [0, 1], shrinks boxes whose extent pokes outside the
    frame, and appends a ClampNote per changed field when the caller passes
    an accumulator list.
    """
    boxes: list[NormalizedBox] = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 5:
            raise LabelParseError(line_no, f"expected 5 fields, got {len(parts)}")
        try:
            class_id = int(parts[0])
            cx, cy, w, h = (float(p) for p in parts[1:])
        except ValueError:
            raise LabelParseError(line_no, f"non-numeric field in {line!r}") from None
        if class_id < 0:
            raise LabelParseError(line_no, f"negative class id {class_id}")
        if not all(math.isfinite(v) for v in (cx, cy, w, h)):
            raise LabelParseError(line_no, "non-finite coordinate")
        if w <= 0 or h <= 0:
            raise LabelParseError(line_no, f"non-positive box size {w}x{h}")
        if strict:
            try:
                box = NormalizedBox(class_id, cx, cy, w, h)
            except InvalidBoxError as exc:
                raise LabelParseError(line_no, str(exc)) from None
        else:
            box = _clamp_box(class_id, (cx, cy, w, h), line_no, clamp_notes)
        boxes.append(box)
    return boxes


def _clamp_box(
    class_id: int,
    values: tuple[float, float, float, float],
    line_no: int,
    notes: list[ClampNote] | None,
) -> NormalizedBox:
    cx, cy, w, h = values

    def fit_axis(center: float, size: float) -> tuple[float, float]:
        center = min(max(center, 0.0), 1.0)
        size = min(size, 1.0)
        if center - size / 2 >= 0.0 and center + size / 2 <= 1.0:
            return center, size  # untouched values stay bit-identical
        # Re-fit an overflowing extent: clip the edges, re-derive center/size.
        # Never degenerates while size > 0.
        lo, hi = max(0.0, center - size / 2), min(1.0, center + size / 2)
        return (lo + hi) / 2, hi - lo

    cx2, w2 = fit_axis(cx, w)
    cy2, h2 = fit_axis(cy, h)
    fixed = (cx2, cy2, w2, h2)
    if notes is not None:
        for name, before, after in zip(("cx", "cy", "w", "h"), values, fixed):
            if after != before:
                notes.append(ClampNote(line_no, name, before, after))
    return NormalizedBox(class_id, *fixed)


def serialize_label_file(boxes: Iterable[NormalizedBox]) -> str:
    """Render boxes as label-file text: 6-decimal fields, LF endings.

    An empty sequence renders as the empty string, which when written to
    disk encodes a negative sample.
    """
    lines = []
    for i, b in enumerate(boxes):
        if b.w < _MIN_SERIALIZABLE or b.h < _MIN_SERIALIZABLE:
            raise LabelFormatError(
                f"box {i}: size {b.w}x{b.h} rounds to zero at 6 decimals"
            )
        lines.append(f"{b.class_id} {b.cx:.6f} {b.cy:.6f} {b.w:.6f} {b.h:.6f}\n")
    return "".join(lines)


def label_path_for(image_path: Path) -> Path:
    """Label file convention: image path with the extension swapped to .txt."""
    return image_path.with_suffix(".txt")


def _read_dims(path: Path) -> ImageDims:
    try:
        with Image.open(path) as im:
            w, h = im.size
    except OSError:
        raise
    except Exception as exc:
        raise DatasetError(f"cannot read image {path}: {exc}") from exc
    return ImageDims(w, h)


def index_dataset(
    root: Path | str,
    image_extensions: Iterable[str] = DEFAULT_IMAGE_EXTENSIONS,
    strict: bool = False,
) -> DatasetIndex:
    """Scan a dataset root into a deterministic DatasetIndex.

    Image discovery is recursive and extension-driven (case-insensitive).
    Label files are parsed leniently by default, matching how public-dataset
    labels with slight overshoot are normally ingested.
    """
    root = Path(root)
    if not root.is_dir():
        raise DatasetError(f"dataset root {root} is not a readable directory")
    exts = {e.lower().lstrip(".") for e in image_extensions}

    entries: list[LabeledImage] = []
    seen: dict[str, Path] = {}
    claimed_labels: set[Path] = set()
    for img_path in sorted(root.rglob("*")):
        if not img_path.is_file() or img_path.suffix.lower().lstrip(".") not in exts:
            continue
        image_id = img_path.relative_to(root).with_suffix("").as_posix()
        if image_id in seen:
            raise DatasetError(
                f"duplicate image id {image_id!r}: {seen[image_id].name} vs {img_path.name}"
            )
        seen[image_id] = img_path

        label_path = label_path_for(img_path)
        if label_path.exists():
            claimed_labels.add(label_path)
            try:
                boxes = parse_label_file(label_path.read_text(), strict=strict)
            except LabelParseError as exc:
                raise DatasetError(f"{label_path}: {exc}") from exc
            state: LabelState = "labeled" if boxes else "negative"
        else:
            boxes = []
            state = "unlabeled"
        entries.append(
            LabeledImage(image_id, _read_dims(img_path), tuple(boxes), state, img_path)
        )

    orphans = [
        p for p in sorted(root.rglob("*.txt")) if p.is_file() and p not in claimed_labels
    ]
    return DatasetIndex(root, entries, orphans)
