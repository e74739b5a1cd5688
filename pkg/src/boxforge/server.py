"""HTTP facade for the review workflow: decision API, image serving, static UI."""
from __future__ import annotations

import threading
from pathlib import Path
from typing import Literal

from fastapi import FastAPI, HTTPException
from fastapi.responses import FileResponse, JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from . import review
from .errors import BoxforgeError, InvalidBoxError, ReviewError
from .labels import NormalizedBox
from .review import ReviewQueue

_CONTENT_TYPES = {
    ".jpg": "image/jpeg",
    ".jpeg": "image/jpeg",
    ".png": "image/png",
}


class BoxModel(BaseModel):
    class_id: int = 0
    cx: float
    cy: float
    w: float
    h: float

    def to_box(self) -> NormalizedBox:
        return NormalizedBox(self.class_id, self.cx, self.cy, self.w, self.h)

    @classmethod
    def from_box(cls, b: NormalizedBox) -> "BoxModel":
        return cls(class_id=b.class_id, cx=b.cx, cy=b.cy, w=b.w, h=b.h)


class ItemModel(BaseModel):
    item_id: str
    image_id: str
    proposed: BoxModel
    confidence: float
    state: str
    final_box: BoxModel | None = None

    @classmethod
    def from_item(cls, item: review.ReviewItem) -> "ItemModel":
        return cls(
            item_id=item.item_id,
            image_id=item.image_id,
            proposed=BoxModel.from_box(item.proposed),
            confidence=item.confidence,
            state=item.state,
            final_box=BoxModel.from_box(item.final_box) if item.final_box else None,
        )


class QueueSummary(BaseModel):
    queue_id: str
    source_iteration: str
    total: int
    pending: int
    accepted: int
    edited: int
    rejected: int


class ItemPage(BaseModel):
    items: list[ItemModel]
    total: int


class DecisionRequest(BaseModel):
    action: Literal["accept", "reject", "edit", "reset"]
    box: BoxModel | None = None


class ExportRequest(BaseModel):
    force: bool = False


class ExportResponse(BaseModel):
    exported_images: int
    negative_images: int
    boxes_exported: int
    rejected_items: int
    skipped_pending_items: int
    edit_drift: dict[str, float]


class ReviewService:
    """Owns the queue, journal, and image root; serializes all mutations."""

    def __init__(
        self,
        queue: ReviewQueue,
        journal_path: Path | str,
        images_root: Path | str | None = None,
        export_root: Path | str | None = None,
    ):
        self.queue = queue
        self.journal_path = Path(journal_path)
        root = images_root if images_root is not None else queue.images_root
        self.images_root = Path(root) if root else None
        self.export_root = Path(export_root) if export_root else None
        self._lock = threading.Lock()

    @classmethod
    def from_files(
        cls,
        queue_path: Path | str,
        journal_path: Path | str,
        images_root: Path | str | None = None,
        export_root: Path | str | None = None,
    ) -> "ReviewService":
        queue = review.load_queue(queue_path, journal_path)
        return cls(queue, journal_path, images_root, export_root)

    def decide(self, item_id: str, action: str, box: NormalizedBox | None) -> review.ReviewItem:
        with self._lock:
            item = review.decide(self.queue, item_id, action, box)
            review.append_journal(self.journal_path, item_id, action, box)
            return item

    def export(self, force: bool) -> review.ExportReport:
        if self.export_root is None:
            raise ReviewError("no export root configured for this service")
        with self._lock:
            _, report = review.export_accepted(
                self.queue, self.export_root, self.images_root, force=force
            )
            return report

    def image_file(self, image_id: str) -> Path:
        if self.images_root is None:
            raise ReviewError("no images root configured for this service")
        path = review._find_image_file(self.images_root, image_id)
        resolved = path.resolve()
        if self.images_root.resolve() not in resolved.parents and resolved != self.images_root.resolve():
            raise ReviewError(f"image path escapes the images root: {image_id!r}")
        return path


def create_app(service: ReviewService, static_dir: Path | str | None = None) -> FastAPI:
    app = FastAPI(title="boxforge review service")

    @app.exception_handler(BoxforgeError)
    async def _on_domain_error(request, exc: BoxforgeError):
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    @app.get("/api/queue", response_model=QueueSummary)
    def get_queue() -> QueueSummary:
        counts = service.queue.counts()
        return QueueSummary(
            queue_id=service.queue.queue_id,
            source_iteration=service.queue.source_iteration,
            total=len(service.queue),
            pending=counts[review.PENDING],
            accepted=counts[review.ACCEPTED],
            edited=counts[review.EDITED],
            rejected=counts[review.REJECTED],
        )

    @app.get("/api/items", response_model=ItemPage)
    def get_items(state: str | None = None, offset: int = 0, limit: int = 1000) -> ItemPage:
        if state is not None and state not in review.STATES:
            raise HTTPException(status_code=422, detail=f"unknown state {state!r}")
        items = [i for i in service.queue.items if state is None or i.state == state]
        page = items[offset : offset + limit]
        return ItemPage(items=[ItemModel.from_item(i) for i in page], total=len(items))

    @app.get("/api/images/{image_id:path}")
    def get_image(image_id: str):
        try:
            path = service.image_file(image_id)
        except ReviewError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from None
        media_type = _CONTENT_TYPES.get(path.suffix.lower(), "application/octet-stream")
        return FileResponse(path, media_type=media_type)

    @app.post("/api/items/{item_id}/decision", response_model=ItemModel)
    def post_decision(item_id: str, body: DecisionRequest) -> ItemModel:
        if body.action == "edit" and body.box is None:
            raise HTTPException(status_code=422, detail="edit decision requires a box")
        try:
            box = body.box.to_box() if body.box is not None else None
        except InvalidBoxError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from None
        try:
            item = service.decide(item_id, body.action, box)
        except ReviewError as exc:
            status = 404 if "unknown item" in str(exc) else 400
            raise HTTPException(status_code=status, detail=str(exc)) from None
        return ItemModel.from_item(item)

    @app.post("/api/export", response_model=ExportResponse)
    def post_export(body: ExportRequest) -> ExportResponse:
        try:
            report = service.export(body.force)
        except ReviewError as exc:
            status = 409 if "pending" in str(exc) else 400
            raise HTTPException(status_code=status, detail=str(exc)) from None
        return ExportResponse(**report.to_dict())

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")

    return app
