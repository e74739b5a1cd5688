"""Region-of-interest cropping: vehicle detections in, wheel-sized crops out.

Detections of vehicle classes become positive crop regions whose contained
labels are remapped into the crop frame; every other detected object becomes
a negative sample (cropped image plus empty label file). A diagnostic pass
flags labels that would collapse below a pixel floor once the image is
letterboxed to the training input side.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Protocol, Sequence

from PIL import Image

from .errors import DatasetError, LabelFormatError
from .evaluation import Detection
from .geometry import PixelBox, letterbox, remap_into_crop, to_pixel
from .labels import (
    DatasetIndex,
    ImageDims,
    index_dataset,
    label_path_for,
    serialize_label_file,
)

POSITIVE_ROI = "positive_roi"
NEGATIVE_SAMPLE = "negative_sample"

DEFAULT_PAD_FRACTION = 0.05
DEFAULT_MIN_VISIBILITY = 0.3
DEFAULT_MIN_PX = 2.0


@dataclass(frozen=True)
class CropJob:
    source_image_id: str
    region: PixelBox
    role: str
    pad_fraction: float

    def __post_init__(self):
        if self.role not in (POSITIVE_ROI, NEGATIVE_SAMPLE):
            raise DatasetError(f"unknown crop role {self.role!r}")
        if self.pad_fraction < 0:
            raise DatasetError(f"pad_fraction must be non-negative, got {self.pad_fraction}")


@dataclass(frozen=True)
class SmallBoxFinding:
    image_id: str
    box_index: int
    scaled_w_px: float
    scaled_h_px: float
    flagged: bool


@dataclass
class CropReport:
    """Outcome counts and per-job failures of one crop run."""

    jobs_total: int = 0
    images_written: int = 0
    boxes_kept: int = 0
    boxes_dropped_visibility: int = 0
    boxes_dropped_tiny: int = 0
    duplicate_outputs: int = 0
    errors: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "jobs_total": self.jobs_total,
            "images_written": self.images_written,
            "boxes_kept": self.boxes_kept,
            "boxes_dropped_visibility": self.boxes_dropped_visibility,
            "boxes_dropped_tiny": self.boxes_dropped_tiny,
            "duplicate_outputs": self.duplicate_outputs,
            "errors": self.errors,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


class RasterStore(Protocol):
    def load(self, path: Path) -> Image.Image: ...


class FileRasterStore:
    """Decodes images straight from the filesystem."""

    def load(self, path: Path) -> Image.Image:
        with Image.open(path) as im:
            im.load()
            return im


def plan_crops(
    vehicle_dets: Sequence[Detection],
    vehicle_classes: Iterable[int],
    pad_fraction: float,
    dims: Mapping[str, ImageDims],
) -> list[CropJob]:
    """Turn an external detector's output into crop jobs.

    Vehicle-class detections become positive regions grown by pad_fraction on
    each side (then clamped to the image); everything else becomes a negative
    sample cut to the detection box itself.
    """
    if pad_fraction < 0:
        raise DatasetError(f"pad_fraction must be non-negative, got {pad_fraction}")
    vehicle_set = set(vehicle_classes)
    jobs: list[CropJob] = []
    for det in vehicle_dets:
        if det.image_id not in dims:
            raise DatasetError(f"detection references unknown image {det.image_id!r}")
        d = dims[det.image_id]
        p = to_pixel(det.box, d)
        if det.box.class_id in vehicle_set:
            px, py = p.width * pad_fraction, p.height * pad_fraction
            region = PixelBox(
                max(0.0, p.x_min - px),
                max(0.0, p.y_min - py),
                min(float(d.width_px), p.x_max + px),
                min(float(d.height_px), p.y_max + py),
                det.box.class_id,
            )
            jobs.append(CropJob(det.image_id, region, POSITIVE_ROI, pad_fraction))
        else:
            jobs.append(CropJob(det.image_id, p, NEGATIVE_SAMPLE, pad_fraction))
    return jobs


def _output_stem(job: CropJob, x0: int, y0: int, x1: int, y1: int) -> str:
    src = job.source_image_id.replace("/", "__")
    tag = "roi" if job.role == POSITIVE_ROI else "neg"
    return f"{src}__{tag}_{x0}_{y0}_{x1}_{y1}"


def execute_crops(
    jobs: Sequence[CropJob],
    labels: DatasetIndex,
    raster: RasterStore,
    min_visibility: float,
    out_root: Path | str,
) -> tuple[DatasetIndex, CropReport]:
    """Cut crop jobs out of their source rasters and write the new dataset.

    Raster bounds are integerized (floor min, ceil max) so no resampling
    happens; labels are remapped against the exact integer region. Failures
    are collected per job and never abort the rest of the run.
    """
    out_root = Path(out_root)
    out_root.mkdir(parents=True, exist_ok=True)
    report = CropReport(jobs_total=len(jobs))
    written: set[str] = set()

    for job in jobs:
        try:
            entry = labels.entry(job.source_image_id)
        except DatasetError as exc:
            report.errors.append({"source_image_id": job.source_image_id, "reason": str(exc)})
            continue
        try:
            im = raster.load(entry.image_path)
        except Exception as exc:
            report.errors.append(
                {"source_image_id": job.source_image_id, "reason": f"decode failed: {exc}"}
            )
            continue

        w, h = entry.dims.width_px, entry.dims.height_px
        x0 = max(0, math.floor(job.region.x_min))
        y0 = max(0, math.floor(job.region.y_min))
        x1 = min(w, math.ceil(job.region.x_max))
        y1 = min(h, math.ceil(job.region.y_max))
        if x1 - x0 < 1 or y1 - y0 < 1:
            report.errors.append(
                {"source_image_id": job.source_image_id, "reason": "region integerizes to nothing"}
            )
            continue

        stem = _output_stem(job, x0, y0, x1, y1)
        if stem in written:
            report.duplicate_outputs += 1
        written.add(stem)

        if job.role == POSITIVE_ROI:
            region = PixelBox(float(x0), float(y0), float(x1), float(y1), job.region.class_id)
            kept = []
            for b in entry.boxes:
                r = remap_into_crop(b, region, entry.dims, min_visibility)
                if r is None:
                    report.boxes_dropped_visibility += 1
                    continue
                try:
                    serialize_label_file([r])
                except LabelFormatError:
                    report.boxes_dropped_tiny += 1
                    continue
                kept.append(r)
            text = serialize_label_file(kept)
            report.boxes_kept += len(kept)
        else:
            text = ""

        img_path = out_root / f"{stem}.png"
        im.crop((x0, y0, x1, y1)).save(img_path)
        label_path_for(img_path).write_text(text)
        report.images_written += 1

    return index_dataset(out_root), report


def small_box_report(
    index: DatasetIndex, input_side: int, min_px: float
) -> list[SmallBoxFinding]:
    """Measure every label at training scale and flag the ones below min_px.

    The scaled size is the box's pixel size after letterboxing its image to
    the square input side; boxes whose short edge lands under min_px are the
    ones integer rounding will mangle during training.
    """
    findings: list[SmallBoxFinding] = []
    for entry in index.entries:
        if not entry.boxes:
            continue
        t = letterbox(entry.dims, input_side)
        for i, b in enumerate(entry.boxes):
            sw = b.w * entry.dims.width_px * t.scale
            sh = b.h * entry.dims.height_px * t.scale
            findings.append(
                SmallBoxFinding(entry.image_id, i, sw, sh, min(sw, sh) < min_px)
            )
    return findings
