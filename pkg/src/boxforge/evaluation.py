"""Detection-quality metrics: NMS, ranked matching, PR curves, AP/mAP, F1.

IoU is computed directly on normalized extents. Intersection and union both
scale by the same width*height factor when moving between the normalized and
pixel frames of one image, so the ratio is identical in either frame and no
pixel conversion is needed for matching.
"""
from __future__ import annotations

import json
import math
from bisect import bisect_left
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import EvaluationError, InvalidBoxError, LabelParseError
from .geometry import iou_extents
from .labels import ImageDims, NormalizedBox, _clamp_box

# 101 evenly spaced recall levels {0.00, 0.01, ..., 1.00}.
RECALL_LEVELS = tuple(i / 100 for i in range(101))

# mAP averaging thresholds 0.50:0.95:0.05.
DEFAULT_IOU_THRESHOLDS = tuple(t / 100 for t in range(50, 100, 5))


@dataclass(frozen=True)
class Detection:
    """A machine-proposed box with confidence."""

    image_id: str
    box: NormalizedBox
    confidence: float

    def __post_init__(self):
        if not (0.0 <= self.confidence <= 1.0):
            raise InvalidBoxError(f"confidence must be in [0, 1], got {self.confidence}")


@dataclass(frozen=True)
class MatchedDetection:
    detection: Detection
    verdict: str  # "TP" | "FP"
    matched_gt: int | None  # index into the image's ground-truth list


@dataclass(frozen=True)
class MatchResult:
    """Confidence-ranked verdicts plus the count of missed ground truths."""

    matches: tuple[MatchedDetection, ...]
    fn_count: int
    iou_threshold: float

    def tp_count(self) -> int:
        return sum(1 for m in self.matches if m.verdict == "TP")


@dataclass(frozen=True)
class MetricsSummary:
    ap50: float
    ap50_95: float
    best_f1: float
    best_f1_confidence: float
    pr_points: tuple[tuple[float, float], ...]
    f1_points: tuple[tuple[float, float], ...]

    def to_dict(self) -> dict:
        return {
            "ap50": self.ap50,
            "ap50_95": self.ap50_95,
            "best_f1": self.best_f1,
            "best_f1_confidence": self.best_f1_confidence,
            "pr_points": [list(p) for p in self.pr_points],
            "f1_points": [list(p) for p in self.f1_points],
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "MetricsSummary":
        return cls(
            ap50=float(d["ap50"]),
            ap50_95=float(d["ap50_95"]),
            best_f1=float(d["best_f1"]),
            best_f1_confidence=float(d["best_f1_confidence"]),
            pr_points=tuple((float(r), float(p)) for r, p in d.get("pr_points", [])),
            f1_points=tuple((float(c), float(f)) for c, f in d.get("f1_points", [])),
        )


def _rank_order(dets: Sequence[Detection]) -> list[int]:
    # Descending confidence; ties broken by image_id, then input order.
    return sorted(range(len(dets)), key=lambda i: (-dets[i].confidence, dets[i].image_id, i))


def _iou_boxes(a: NormalizedBox, b: NormalizedBox) -> float:
    return iou_extents(
        a.x_min, a.y_min, a.x_max, a.y_max, b.x_min, b.y_min, b.x_max, b.y_max
    )


def nms(dets: Sequence[Detection], iou_threshold: float) -> list[Detection]:
    """Greedy per-image, per-class suppression; keeps the ranked survivors."""
    if not (0.0 < iou_threshold <= 1.0):
        raise EvaluationError(f"iou_threshold must be in (0, 1], got {iou_threshold}")
    order = _rank_order(dets)
    kept_by_group: dict[tuple[str, int], list[Detection]] = {}
    kept_indices: list[int] = []
    for idx in order:
        d = dets[idx]
        group = kept_by_group.setdefault((d.image_id, d.box.class_id), [])
        if any(_iou_boxes(d.box, k.box) >= iou_threshold for k in group):
            continue
        group.append(d)
        kept_indices.append(idx)
    return [dets[i] for i in kept_indices]


def match_detections(
    dets: Sequence[Detection],
    gts: Mapping[str, Sequence[NormalizedBox]],
    dims: Mapping[str, ImageDims],
    iou_threshold: float,
) -> MatchResult:
    """Greedy confidence-ordered matching of detections to ground truth.

    A detection is TP iff its best-IoU unmatched same-class ground truth in
    the same image reaches the threshold; IoU ties resolve to the lowest
    ground-truth index. Each ground truth matches at most once.
    """
    if not (0.0 < iou_threshold <= 1.0):
        raise EvaluationError(f"iou_threshold must be in (0, 1], got {iou_threshold}")
    for d in dets:
        if d.image_id not in dims:
            raise EvaluationError(f"detection references unknown image {d.image_id!r}")

    taken: dict[str, set[int]] = {}
    matches: list[MatchedDetection] = []
    for idx in _rank_order(dets):
        d = dets[idx]
        used = taken.setdefault(d.image_id, set())
        best_iou = 0.0
        best_gt: int | None = None
        for gi, g in enumerate(gts.get(d.image_id, ())):
            if gi in used or g.class_id != d.box.class_id:
                continue
            v = _iou_boxes(d.box, g)
            if v > best_iou:
                best_iou, best_gt = v, gi
        if best_gt is not None and best_iou >= iou_threshold:
            used.add(best_gt)
            matches.append(MatchedDetection(d, "TP", best_gt))
        else:
            matches.append(MatchedDetection(d, "FP", None))

    total_gt = sum(len(v) for v in gts.values())
    tp = sum(1 for m in matches if m.verdict == "TP")
    return MatchResult(tuple(matches), total_gt - tp, iou_threshold)


def pr_curve(m: MatchResult, total_gt: int) -> list[tuple[float, float]]:
    """Cumulative (recall, precision) at each rank prefix of the match result."""
    if total_gt == 0:
        if m.matches:
            raise EvaluationError("recall undefined: detections present but no ground truth")
        return []
    if total_gt != m.tp_count() + m.fn_count:
        raise EvaluationError(
            f"total_gt={total_gt} inconsistent with matches (tp={m.tp_count()}, fn={m.fn_count})"
        )
    points = []
    tp = fp = 0
    for md in m.matches:
        if md.verdict == "TP":
            tp += 1
        else:
            fp += 1
        points.append((tp / total_gt, tp / (tp + fp)))
    return points


def average_precision(points: Sequence[tuple[float, float]]) -> float:
    """101-point interpolated AP over a cumulative PR curve.

    For each recall level the score is the best precision achieved at that
    recall or beyond (zero when the curve never reaches it).
    """
    if not points:
        return 0.0
    recalls = [r for r, _ in points]
    # Recall is non-decreasing along ranks, so a suffix maximum gives the
    # best precision at-or-beyond each point.
    envelope = [0.0] * len(points)
    best = 0.0
    for i in range(len(points) - 1, -1, -1):
        best = max(best, points[i][1])
        envelope[i] = best
    total = 0.0
    for level in RECALL_LEVELS:
        k = bisect_left(recalls, level)
        if k < len(points):
            total += envelope[k]
    return total / len(RECALL_LEVELS)


def precision_envelope(points: Sequence[tuple[float, float]]) -> list[tuple[float, float]]:
    """PR points with precision replaced by its suffix maximum (monotone curve)."""
    out: list[tuple[float, float]] = []
    best = 0.0
    for r, p in reversed(points):
        best = max(best, p)
        out.append((r, best))
    out.reverse()
    return out


def f1_curve(m: MatchResult, total_gt: int) -> list[tuple[float, float]]:
    """(confidence cutoff, F1) at every distinct confidence in the ranking."""
    if total_gt == 0:
        return []
    points: list[tuple[float, float]] = []
    tp = fp = 0
    n = len(m.matches)
    for i, md in enumerate(m.matches):
        if md.verdict == "TP":
            tp += 1
        else:
            fp += 1
        conf = md.detection.confidence
        # Emit once per distinct confidence, at the last rank sharing it.
        if i + 1 < n and m.matches[i + 1].detection.confidence == conf:
            continue
        precision = tp / (tp + fp)
        recall = tp / total_gt
        f1 = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
        points.append((conf, f1))
    return points


def evaluate(
    dets: Sequence[Detection],
    gts: Mapping[str, Sequence[NormalizedBox]],
    dims: Mapping[str, ImageDims],
    iou_thresholds: Sequence[float] | None = None,
) -> MetricsSummary:
    """Full metric sweep: AP@0.5, mean AP over thresholds, F1-vs-confidence.

    AP is averaged per class over classes that own at least one ground-truth
    box (the single-class path reduces to that class's AP). The stored PR and
    F1 curves pool all classes at IoU 0.5.
    """
    thresholds = tuple(iou_thresholds) if iou_thresholds is not None else DEFAULT_IOU_THRESHOLDS
    if not thresholds:
        raise EvaluationError("iou_thresholds must be non-empty")
    for t in thresholds:
        if not (0.0 < t <= 1.0):
            raise EvaluationError(f"iou threshold {t} outside (0, 1]")

    total_gt = sum(len(v) for v in gts.values())
    if total_gt == 0 and dets:
        raise EvaluationError("recall undefined: detections present but no ground truth")

    classes = sorted({g.class_id for boxes in gts.values() for g in boxes})

    def class_subset(c: int):
        sub_dets = [d for d in dets if d.box.class_id == c]
        sub_gts = {
            img: [g for g in boxes if g.class_id == c] for img, boxes in gts.items()
        }
        return sub_dets, sub_gts

    def ap_at(c: int, threshold: float) -> float:
        sub_dets, sub_gts = class_subset(c)
        m = match_detections(sub_dets, sub_gts, dims, threshold)
        n_gt = sum(len(v) for v in sub_gts.values())
        return average_precision(pr_curve(m, n_gt))

    if classes:
        ap50 = sum(ap_at(c, 0.5) for c in classes) / len(classes)
        ap50_95 = sum(
            sum(ap_at(c, t) for t in thresholds) / len(thresholds) for c in classes
        ) / len(classes)
    else:
        ap50 = ap50_95 = 0.0

    # Pooled curves at IoU 0.5: per-class verdicts merged back into one ranking.
    pooled: list[MatchedDetection] = []
    for c in classes or []:
        sub_dets, sub_gts = class_subset(c)
        pooled.extend(match_detections(sub_dets, sub_gts, dims, 0.5).matches)
    pooled.sort(key=lambda md: (-md.detection.confidence, md.detection.image_id))
    tp = sum(1 for md in pooled if md.verdict == "TP")
    merged = MatchResult(tuple(pooled), total_gt - tp, 0.5)

    pr_raw = pr_curve(merged, total_gt) if total_gt else []
    f1_points = f1_curve(merged, total_gt)
    if f1_points:
        # Max F1; ties resolve to the higher-confidence cutoff.
        best_f1_confidence, best_f1 = max(f1_points, key=lambda cf: (cf[1], cf[0]))
    else:
        best_f1 = best_f1_confidence = 0.0

    return MetricsSummary(
        ap50=ap50,
        ap50_95=ap50_95,
        best_f1=best_f1,
        best_f1_confidence=best_f1_confidence,
        pr_points=tuple(precision_envelope(pr_raw)),
        f1_points=tuple(f1_points),
    )


# ---------------------------------------------------------------------------
# Detections file I/O (JSON lines)

DETECTION_FIELDS = ("image_id", "class_id", "cx", "cy", "w", "h", "confidence")


def parse_detections_jsonl(text: str, strict: bool = False) -> list[Detection]:
    """Parse a detections file: one JSON object per line.

    Machine outputs routinely overshoot the frame by float noise, so by
    default boxes are clamped the same way lenient label parsing clamps them.
    """
    dets: list[Detection] = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise LabelParseError(line_no, f"invalid JSON: {exc.msg}") from None
        if not isinstance(obj, dict):
            raise LabelParseError(line_no, "expected a JSON object")
        missing = [f for f in DETECTION_FIELDS if f not in obj]
        if missing:
            raise LabelParseError(line_no, f"missing fields: {', '.join(missing)}")
        try:
            image_id = str(obj["image_id"])
            class_id = int(obj["class_id"])
            cx, cy, w, h = (float(obj[f]) for f in ("cx", "cy", "w", "h"))
            confidence = float(obj["confidence"])
        except (TypeError, ValueError):
            raise LabelParseError(line_no, "non-numeric coordinate field") from None
        if class_id < 0:
            raise LabelParseError(line_no, f"negative class id {class_id}")
        if not all(math.isfinite(v) for v in (cx, cy, w, h, confidence)):
            raise LabelParseError(line_no, "non-finite value")
        if w <= 0 or h <= 0:
            raise LabelParseError(line_no, f"non-positive box size {w}x{h}")
        try:
            if strict:
                box = NormalizedBox(class_id, cx, cy, w, h)
            else:
                box = _clamp_box(class_id, (cx, cy, w, h), line_no, None)
            dets.append(Detection(image_id, box, confidence))
        except InvalidBoxError as exc:
            raise LabelParseError(line_no, str(exc)) from None
    return dets


def read_detections_jsonl(path: Path | str, strict: bool = False) -> list[Detection]:
    return parse_detections_jsonl(Path(path).read_text(), strict=strict)


def write_detections_jsonl(dets: Iterable[Detection], path: Path | str) -> None:
    lines = []
    for d in dets:
        lines.append(
            json.dumps(
                {
                    "image_id": d.image_id,
                    "class_id": d.box.class_id,
                    "cx": d.box.cx,
                    "cy": d.box.cy,
                    "w": d.box.w,
                    "h": d.box.h,
                    "confidence": d.confidence,
                },
                sort_keys=True,
            )
        )
    Path(path).write_text("".join(l + "\n" for l in lines))


def metrics_csv(summary: MetricsSummary, iteration: str = "") -> str:
    """Flat CSV rendering of the headline metrics for one iteration."""
    header = "iteration,ap50,ap50_95,best_f1,best_f1_confidence"
    row = (
        f"{iteration},{summary.ap50:.6f},{summary.ap50_95:.6f},"
        f"{summary.best_f1:.6f},{summary.best_f1_confidence:.6f}"
    )
    return header + "\n" + row + "\n"
