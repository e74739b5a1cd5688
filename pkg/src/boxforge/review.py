"""Human review of machine pre-labels: queue lifecycle, decision journal, export.

A queue is an ordered snapshot of imported detections; every decision is an
append-only journal event, and the current state is always the fold of the
journal over the snapshot. Decisions stay revisable until export, which
serializes accepted/edited boxes into label files (an image whose proposals
were all rejected becomes a reviewed negative: an empty label file).
"""
from __future__ import annotations

import json
import shutil
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import ReviewError
from .evaluation import Detection, read_detections_jsonl
from .geometry import iou_extents
from .labels import (
    DatasetIndex,
    NormalizedBox,
    index_dataset,
    serialize_label_file,
)

PENDING = "pending"
ACCEPTED = "accepted"
EDITED = "edited"
REJECTED = "rejected"

STATES = (PENDING, ACCEPTED, EDITED, REJECTED)

ACTIONS = ("accept", "reject", "edit", "reset")

DEFAULT_CONF_THRESHOLD = 0.25


@dataclass(frozen=True)
class ReviewItem:
    """One machine proposal awaiting (or carrying) a human decision."""

    item_id: str
    image_id: str
    proposed: NormalizedBox
    confidence: float
    state: str = PENDING
    final_box: NormalizedBox | None = None

    def __post_init__(self):
        if self.state not in STATES:
            raise ReviewError(f"unknown review state {self.state!r}")
        if self.state == ACCEPTED and self.final_box != self.proposed:
            raise ReviewError("accepted item must carry the proposed box")
        if self.state == EDITED and (self.final_box is None or self.final_box == self.proposed):
            raise ReviewError("edited item must carry a box different from the proposal")
        if self.state in (PENDING, REJECTED) and self.final_box is not None:
            raise ReviewError(f"{self.state} item must not carry a final box")


class ReviewQueue:
    """Ordered review items for one pre-labeling pass."""

    def __init__(
        self,
        queue_id: str,
        items: Iterable[ReviewItem],
        source_iteration: str = "",
        images_root: str | None = None,
    ):
        self.queue_id = queue_id
        self.source_iteration = source_iteration
        self.images_root = images_root
        self._order: list[str] = []
        self._items: dict[str, ReviewItem] = {}
        for item in items:
            if item.item_id in self._items:
                raise ReviewError(f"duplicate item id {item.item_id!r}")
            self._items[item.item_id] = item
            self._order.append(item.item_id)

    def __len__(self) -> int:
        return len(self._order)

    @property
    def items(self) -> list[ReviewItem]:
        return [self._items[i] for i in self._order]

    def item(self, item_id: str) -> ReviewItem:
        try:
            return self._items[item_id]
        except KeyError:
            raise ReviewError(f"unknown item {item_id!r}") from None

    def replace_item(self, item: ReviewItem) -> None:
        if item.item_id not in self._items:
            raise ReviewError(f"unknown item {item.item_id!r}")
        self._items[item.item_id] = item

    def counts(self) -> dict[str, int]:
        out = {s: 0 for s in STATES}
        for item in self.items:
            out[item.state] += 1
        return out

    def pending_count(self) -> int:
        return self.counts()[PENDING]


@dataclass(frozen=True)
class ImportResult:
    queue: ReviewQueue
    dropped_below_threshold: int


def queue_from_detections(
    dets: Sequence[Detection],
    conf_threshold: float = DEFAULT_CONF_THRESHOLD,
    queue_id: str = "review",
    source_iteration: str = "",
    images_root: str | None = None,
) -> ImportResult:
    """Build a pending queue from detections at or above the threshold.

    Items are ordered by image id, then by descending confidence, and get
    sequential URL-safe ids so the ordering survives reloads.
    """
    if not (0.0 <= conf_threshold <= 1.0):
        raise ReviewError(f"confidence threshold must be in [0, 1], got {conf_threshold}")
    kept_order = sorted(
        (i for i, d in enumerate(dets) if d.confidence >= conf_threshold),
        key=lambda i: (dets[i].image_id, -dets[i].confidence, i),
    )
    items = [
        ReviewItem(
            item_id=f"item-{n:04d}",
            image_id=dets[i].image_id,
            proposed=dets[i].box,
            confidence=dets[i].confidence,
        )
        for n, i in enumerate(kept_order)
    ]
    queue = ReviewQueue(queue_id, items, source_iteration, images_root)
    return ImportResult(queue, len(dets) - len(items))


def import_detections(
    path: Path | str,
    conf_threshold: float = DEFAULT_CONF_THRESHOLD,
    queue_id: str = "review",
    source_iteration: str = "",
    images_root: str | None = None,
) -> ImportResult:
    """Read a detections file and stage it as a review queue."""
    dets = read_detections_jsonl(path)
    return queue_from_detections(dets, conf_threshold, queue_id, source_iteration, images_root)


def decide(
    queue: ReviewQueue,
    item_id: str,
    action: str,
    box: NormalizedBox | None = None,
) -> ReviewItem:
    """Apply one decision and return the item's new state.

    Decisions are revisable; `reset` returns an item to pending. An edit that
    reproduces the proposal exactly is recorded as an accept, keeping the
    edited-means-changed invariant intact.
    """
    item = queue.item(item_id)
    if action == "accept":
        updated = replace(item, state=ACCEPTED, final_box=item.proposed)
    elif action == "reject":
        updated = replace(item, state=REJECTED, final_box=None)
    elif action == "reset":
        updated = replace(item, state=PENDING, final_box=None)
    elif action == "edit":
        if box is None:
            raise ReviewError("edit decision requires a box")
        if box == item.proposed:
            updated = replace(item, state=ACCEPTED, final_box=item.proposed)
        else:
            updated = replace(item, state=EDITED, final_box=box)
    else:
        raise ReviewError(f"unknown action {action!r}")
    queue.replace_item(updated)
    return updated


# ---------------------------------------------------------------------------
# Persistence: queue snapshot + decision journal

def _box_to_dict(b: NormalizedBox) -> dict:
    return {"class_id": b.class_id, "cx": b.cx, "cy": b.cy, "w": b.w, "h": b.h}


def _box_from_dict(d: Mapping) -> NormalizedBox:
    try:
        return NormalizedBox(
            int(d["class_id"]), float(d["cx"]), float(d["cy"]), float(d["w"]), float(d["h"])
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ReviewError(f"invalid box payload: {exc}") from exc


def save_queue(queue: ReviewQueue, path: Path | str) -> None:
    doc = {
        "queue_id": queue.queue_id,
        "source_iteration": queue.source_iteration,
        "images_root": queue.images_root,
        "items": [
            {
                "item_id": i.item_id,
                "image_id": i.image_id,
                "confidence": i.confidence,
                **_box_to_dict(i.proposed),
            }
            for i in queue.items
        ],
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def load_queue(path: Path | str, journal_path: Path | str | None = None) -> ReviewQueue:
    """Rebuild a queue from its snapshot, then replay the journal over it."""
    doc = json.loads(Path(path).read_text())
    items = [
        ReviewItem(
            item_id=entry["item_id"],
            image_id=entry["image_id"],
            proposed=_box_from_dict(entry),
            confidence=float(entry["confidence"]),
        )
        for entry in doc["items"]
    ]
    queue = ReviewQueue(
        doc["queue_id"], items, doc.get("source_iteration", ""), doc.get("images_root")
    )
    if journal_path is not None and Path(journal_path).exists():
        for event in read_journal(journal_path):
            decide(queue, event["item_id"], event["action"], event.get("box"))
    return queue


def append_journal(journal_path: Path | str, item_id: str, action: str,
                   box: NormalizedBox | None = None) -> dict:
    event: dict = {"item_id": item_id, "action": action,
                   "at": datetime.now(timezone.utc).isoformat()}
    if box is not None:
        event["box"] = _box_to_dict(box)
    with open(journal_path, "a") as fh:
        fh.write(json.dumps(event, sort_keys=True) + "\n")
    return event


def read_journal(journal_path: Path | str) -> list[dict]:
    events = []
    for line_no, raw in enumerate(Path(journal_path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        try:
            event = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ReviewError(f"journal line {line_no}: invalid JSON ({exc.msg})") from None
        if "box" in event and event["box"] is not None:
            event["box"] = _box_from_dict(event["box"])
        else:
            event["box"] = None
        events.append(event)
    return events


# ---------------------------------------------------------------------------
# Export

@dataclass
class ExportReport:
    exported_images: int = 0
    negative_images: int = 0
    boxes_exported: int = 0
    rejected_items: int = 0
    skipped_pending_items: int = 0
    edit_drift: dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "exported_images": self.exported_images,
            "negative_images": self.negative_images,
            "boxes_exported": self.boxes_exported,
            "rejected_items": self.rejected_items,
            "skipped_pending_items": self.skipped_pending_items,
            "edit_drift": self.edit_drift,
        }


def _edit_iou(a: NormalizedBox, b: NormalizedBox) -> float:
    return iou_extents(a.x_min, a.y_min, a.x_max, a.y_max,
                       b.x_min, b.y_min, b.x_max, b.y_max)


def _find_image_file(images_root: Path, image_id: str) -> Path:
    for ext in (".jpg", ".jpeg", ".png", ".JPG", ".JPEG", ".PNG"):
        candidate = images_root / f"{image_id}{ext}"
        if candidate.exists():
            return candidate
    raise ReviewError(f"no image file for {image_id!r} under {images_root}")


def export_accepted(
    queue: ReviewQueue,
    out_root: Path | str,
    images_root: Path | str | None = None,
    force: bool = False,
) -> tuple[DatasetIndex, ExportReport]:
    """Write reviewed labels (and their images) as a new dataset root.

    Requires a fully decided queue unless force is set, in which case pending
    items are skipped. Accepted and edited boxes export in item order; images
    whose items were all rejected export an empty label file.
    """
    pending = queue.pending_count()
    if pending and not force:
        raise ReviewError(f"{pending} items still pending; use force to export decided items only")

    root = Path(images_root) if images_root is not None else (
        Path(queue.images_root) if queue.images_root else None
    )
    if root is None:
        raise ReviewError("an images root is required to export a dataset")

    out_root = Path(out_root)
    out_root.mkdir(parents=True, exist_ok=True)

    report = ExportReport(skipped_pending_items=pending)
    per_image: dict[str, list[ReviewItem]] = {}
    for item in queue.items:
        if item.state == PENDING:
            continue
        per_image.setdefault(item.image_id, []).append(item)

    for image_id, items in sorted(per_image.items()):
        boxes = []
        for item in items:
            if item.state == REJECTED:
                report.rejected_items += 1
                continue
            boxes.append(item.final_box)
            if item.state == EDITED:
                report.edit_drift[item.item_id] = _edit_iou(item.proposed, item.final_box)
        src = _find_image_file(root, image_id)
        dst = out_root / f"{image_id}{src.suffix}"
        dst.parent.mkdir(parents=True, exist_ok=True)
        shutil.copyfile(src, dst)
        (out_root / f"{image_id}.txt").write_text(serialize_label_file(boxes))
        report.exported_images += 1
        report.boxes_exported += len(boxes)
        if not boxes:
            report.negative_images += 1

    return index_dataset(out_root), report
