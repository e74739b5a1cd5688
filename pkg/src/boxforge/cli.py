"""Command-line entry point wiring every pipeline stage to flags and files.

Reports print to stdout as JSON by default and are written to files only when
--out (or a sibling flag) names one. Exit codes: 0 success, 1 validation
failure, 2 I/O failure.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path

from . import crops, evaluation, ledger as ledger_mod, review
from .errors import BoxforgeError
from .labels import DEFAULT_IMAGE_EXTENSIONS, index_dataset

MANIFEST_ENV = "BOXFORGE_MANIFEST"
DEFAULT_MANIFEST = "boxforge-manifest.json"


@dataclass(frozen=True)
class CommandOutcome:
    exit_code: int
    report_path: Path | None = None


class _UsageError(Exception):
    def __init__(self, parser: argparse.ArgumentParser, message: str):
        super().__init__(message)
        self.parser = parser


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad flags; the CLI contract wants 1 plus usage text.
    def error(self, message):
        raise _UsageError(self, message)


def _parse_iou_range(expr: str) -> list[float]:
    """`start:stop:step` inclusive range, or a single threshold value."""
    parts = expr.split(":")
    if len(parts) == 1:
        return [float(parts[0])]
    if len(parts) != 3:
        raise BoxforgeError(f"bad threshold range {expr!r}; expected start:stop:step")
    start, stop, step = (float(p) for p in parts)
    if step <= 0 or stop < start:
        raise BoxforgeError(f"bad threshold range {expr!r}")
    count = int(round((stop - start) / step)) + 1
    return [round(start + i * step, 10) for i in range(count)]


def _emit(report: dict, out: str | None) -> Path | None:
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if out:
        path = Path(out)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
        return path
    sys.stdout.write(text)
    return None


def _manifest_path(args) -> Path:
    if args.manifest:
        return Path(args.manifest)
    return Path(os.environ.get(MANIFEST_ENV, DEFAULT_MANIFEST))


_LABEL_FORMAT = """\
label files: plain text next to each image (extension swapped to .txt), one
object per line `<class> <cx> <cy> <w> <h>`, center/size as fractions of the
image dimensions, space-separated, LF endings. An existing empty file marks a
reviewed negative image; a missing file means unlabeled. Image discovery uses
extensions {jpg, jpeg, png}, case-insensitively."""

_DETS_FORMAT = """\
detections file: JSON lines, one object per line with fields
{image_id, class_id, cx, cy, w, h, confidence}, normalized coordinates."""

_MANIFEST_FORMAT = """\
manifest: versioned JSON {version, datasets, iterations: [...]}.
loss-series CSV: header `step,value`, steps strictly increasing."""


def _build_parser() -> _Parser:
    parser = _Parser(prog="boxforge", description=__doc__)
    sub = parser.add_subparsers(dest="command", metavar="command", parser_class=_Parser)

    p = sub.add_parser("index",
                       help="scan a dataset root and report label states",
                       epilog=_LABEL_FORMAT,
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--root", required=True, help="dataset directory")
    p.add_argument("--extensions", default=",".join(sorted(DEFAULT_IMAGE_EXTENSIONS)),
                   help="comma-separated image extensions (default: jpg,jpeg,png)")
    p.add_argument("--strict", action="store_true",
                   help="reject out-of-range label values instead of clamping")
    p.add_argument("--out", help="write the report JSON here instead of stdout")

    p = sub.add_parser("split",
                       help="deterministic train/validation split by hashed image id",
                       epilog=_LABEL_FORMAT,
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--root", required=True)
    p.add_argument("--ratio", type=float, required=True, help="validation fraction in (0,1)")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--stratify-top-dir", action="store_true",
                   help="apply the quota per top-level directory")
    p.add_argument("--out", help="directory for train.txt/val.txt; stdout JSON otherwise")

    p = sub.add_parser("crop",
                       help="cut vehicle-region crops and remap their labels",
                       epilog=_DETS_FORMAT + "\n" + _LABEL_FORMAT,
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--dets", required=True, help="vehicle detections (JSON lines)")
    p.add_argument("--root", required=True, help="source dataset root")
    p.add_argument("--out-root", required=True, help="destination dataset root")
    p.add_argument("--vehicle-classes", default="2,5,7",
                   help="comma-separated class ids treated as vehicles (default COCO car,bus,truck)")
    p.add_argument("--pad-fraction", type=float, default=crops.DEFAULT_PAD_FRACTION)
    p.add_argument("--min-visibility", type=float, default=crops.DEFAULT_MIN_VISIBILITY)
    p.add_argument("--out", help="write the crop report JSON here instead of stdout")

    p = sub.add_parser("diagnose",
                       help="flag labels that scale below a pixel floor at input size",
                       epilog=_LABEL_FORMAT,
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--root", required=True)
    p.add_argument("--input-side", type=int, default=512)
    p.add_argument("--min-px", type=float, default=crops.DEFAULT_MIN_PX)
    p.add_argument("--all", action="store_true", help="include unflagged boxes in the report")
    p.add_argument("--out", help="write the report JSON here instead of stdout")

    p = sub.add_parser("eval",
                       help="detection metrics against a ground-truth dataset root",
                       epilog=_DETS_FORMAT + "\nCSV columns: iteration,ap50,ap50_95,best_f1,best_f1_confidence",
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--dets", required=True, help="detections file (JSON lines)")
    p.add_argument("--gt", required=True, help="ground-truth dataset root")
    p.add_argument("--iou", default="0.5:0.95:0.05",
                   help="IoU threshold or start:stop:step range (default 0.5:0.95:0.05)")
    p.add_argument("--iteration", default="", help="label for the CSV row")
    p.add_argument("--csv", help="also write the metrics CSV here")
    p.add_argument("--out", help="write the metrics JSON here instead of stdout")

    p = sub.add_parser("import",
                       help="stage a detections file as a review queue",
                       epilog=_DETS_FORMAT,
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--dets", required=True)
    p.add_argument("--queue", required=True, help="queue snapshot path to write")
    p.add_argument("--threshold", type=float, default=review.DEFAULT_CONF_THRESHOLD)
    p.add_argument("--images", help="images root recorded into the queue")
    p.add_argument("--source-iteration", default="")
    p.add_argument("--queue-id", default="review")
    p.add_argument("--out", help="write the import report JSON here instead of stdout")

    p = sub.add_parser("serve",
                       help="run the review HTTP service (and static UI, when built)",
                       epilog="journal: JSON lines of decision events {item_id, action, box?, at}",
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--addr", default="127.0.0.1:8000", help="host:port to bind")
    p.add_argument("--queue", required=True, help="queue snapshot path")
    p.add_argument("--journal", help="journal path (default: <queue>.journal.jsonl)")
    p.add_argument("--images", help="images root (default: the queue's recorded root)")
    p.add_argument("--export-root", help="directory receiving exported datasets")
    p.add_argument("--static", help="directory with the built browser UI")

    p = sub.add_parser("export",
                       help="write reviewed labels (and images) as a dataset root",
                       epilog=_LABEL_FORMAT,
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--queue", required=True)
    p.add_argument("--journal", help="journal path (default: <queue>.journal.jsonl)")
    p.add_argument("--out-root", required=True)
    p.add_argument("--images", help="images root (default: the queue's recorded root)")
    p.add_argument("--force", action="store_true", help="export decided items despite pending ones")
    p.add_argument("--out", help="write the export report JSON here instead of stdout")

    p = sub.add_parser("ledger", help="iteration ledger operations",
                       epilog=_MANIFEST_FORMAT,
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--manifest", help=f"manifest path (default: ${MANIFEST_ENV} or {DEFAULT_MANIFEST})")
    lsub = p.add_subparsers(dest="ledger_command", metavar="action", parser_class=_Parser)

    lp = lsub.add_parser("add-dataset", help="register a dataset id")
    lp.add_argument("--id", required=True, dest="dataset_id")
    lp.add_argument("--root", required=True)

    lp = lsub.add_parser("record", help="record one training iteration")
    lp.add_argument("--id", required=True, dest="iteration_id")
    lp.add_argument("--root", required=True, help="combined dataset root for this iteration")
    lp.add_argument("--input-side", type=int, default=512)
    lp.add_argument("--batch", type=int, required=True)
    lp.add_argument("--ratio", type=float, required=True)
    lp.add_argument("--seed", type=int, required=True)
    lp.add_argument("--weights", required=True, help="parent weights tag (e.g. yolov5m.pt, last.pt)")
    lp.add_argument("--sources", default="", help="comma-separated dataset ids")
    lp.add_argument("--metrics", help="metrics JSON produced by `boxforge eval`")
    lp.add_argument("--series", action="append", default=[],
                    help="name=path of a step,value CSV (repeatable)")

    lp = lsub.add_parser("compare", help="tabulate iterations side by side")
    lp.add_argument("ids", nargs="+")
    lp.add_argument("--out", help="write the comparison JSON here instead of stdout")

    lp = lsub.add_parser("lineage", help="weight ancestry of an iteration")
    lp.add_argument("iteration_id")

    return parser


# ---------------------------------------------------------------------------
# Subcommand bodies

def _cmd_index(args) -> CommandOutcome:
    idx = index_dataset(args.root, args.extensions.split(","), strict=args.strict)
    report = {
        "root": str(idx.root),
        "counts": idx.counts(),
        "total_boxes": sum(len(e.boxes) for e in idx.entries),
        "orphans": [str(p) for p in idx.orphans],
        "entries": [
            {"image_id": e.image_id, "state": e.label_state, "boxes": len(e.boxes)}
            for e in idx.entries
        ],
    }
    return CommandOutcome(0, _emit(report, args.out))


def _cmd_split(args) -> CommandOutcome:
    idx = index_dataset(args.root)
    train, val = ledger_mod.split(idx, args.ratio, args.seed,
                                  stratify_by_top_dir=args.stratify_top_dir)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "train.txt").write_text("".join(i + "\n" for i in train))
        (out / "val.txt").write_text("".join(i + "\n" for i in val))
        sys.stdout.write(f"train {len(train)} / val {len(val)} -> {out}\n")
        return CommandOutcome(0, out / "val.txt")
    _emit({"train": train, "val": val,
           "train_count": len(train), "val_count": len(val)}, None)
    return CommandOutcome(0)


def _cmd_crop(args) -> CommandOutcome:
    idx = index_dataset(args.root)
    dets = evaluation.read_detections_jsonl(args.dets)
    vehicle_classes = {int(c) for c in args.vehicle_classes.split(",") if c.strip()}
    jobs = crops.plan_crops(dets, vehicle_classes, args.pad_fraction, idx.dims_map())
    _, report = crops.execute_crops(jobs, idx, crops.FileRasterStore(),
                                    args.min_visibility, args.out_root)
    return CommandOutcome(0, _emit(report.to_dict(), args.out))


def _cmd_diagnose(args) -> CommandOutcome:
    idx = index_dataset(args.root)
    findings = crops.small_box_report(idx, args.input_side, args.min_px)
    shown = findings if args.all else [f for f in findings if f.flagged]
    report = {
        "input_side": args.input_side,
        "min_px": args.min_px,
        "total_boxes": len(findings),
        "flagged": sum(1 for f in findings if f.flagged),
        "findings": [
            {
                "image_id": f.image_id,
                "box_index": f.box_index,
                "scaled_w_px": f.scaled_w_px,
                "scaled_h_px": f.scaled_h_px,
                "flagged": f.flagged,
            }
            for f in shown
        ],
    }
    return CommandOutcome(0, _emit(report, args.out))


def _cmd_eval(args) -> CommandOutcome:
    idx = index_dataset(args.gt)
    dets = evaluation.read_detections_jsonl(args.dets)
    thresholds = _parse_iou_range(args.iou)
    summary = evaluation.evaluate(dets, idx.boxes_map(), idx.dims_map(), thresholds)
    if args.csv:
        csv_path = Path(args.csv)
        csv_path.parent.mkdir(parents=True, exist_ok=True)
        csv_path.write_text(evaluation.metrics_csv(summary, args.iteration))
    return CommandOutcome(0, _emit(summary.to_dict(), args.out))


def _cmd_import(args) -> CommandOutcome:
    result = review.import_detections(
        args.dets, args.threshold,
        queue_id=args.queue_id,
        source_iteration=args.source_iteration,
        images_root=args.images,
    )
    review.save_queue(result.queue, args.queue)
    report = {
        "queue": str(args.queue),
        "items": len(result.queue),
        "dropped_below_threshold": result.dropped_below_threshold,
        "threshold": args.threshold,
    }
    return CommandOutcome(0, _emit(report, args.out))


def _default_journal(queue_path: str) -> Path:
    return Path(queue_path).with_suffix(".journal.jsonl")


def _cmd_serve(args) -> CommandOutcome:
    import uvicorn

    from .server import ReviewService, create_app

    host, _, port = args.addr.rpartition(":")
    if not host or not port.isdigit():
        raise BoxforgeError(f"bad --addr {args.addr!r}; expected host:port")
    journal = Path(args.journal) if args.journal else _default_journal(args.queue)
    service = ReviewService.from_files(args.queue, journal, args.images, args.export_root)
    app = create_app(service, static_dir=args.static)
    uvicorn.run(app, host=host, port=int(port), log_level="info")
    return CommandOutcome(0)


def _cmd_export(args) -> CommandOutcome:
    journal = Path(args.journal) if args.journal else _default_journal(args.queue)
    queue = review.load_queue(args.queue, journal if journal.exists() else None)
    _, report = review.export_accepted(queue, args.out_root, args.images, force=args.force)
    return CommandOutcome(0, _emit(report.to_dict(), args.out))


def _cmd_ledger(args, parser) -> CommandOutcome:
    book = ledger_mod.Ledger.load(_manifest_path(args))
    if args.ledger_command == "add-dataset":
        book.add_dataset(args.dataset_id, args.root)
        book.save()
        sys.stdout.write(f"registered dataset {args.dataset_id!r}\n")
        return CommandOutcome(0, book.path)
    if args.ledger_command == "record":
        idx = index_dataset(args.root)
        config = ledger_mod.IterationConfig(
            iteration_id=args.iteration_id,
            input_side=args.input_side,
            batch_size=args.batch,
            split_ratio=args.ratio,
            split_seed=args.seed,
            parent_weights=args.weights,
            dataset_sources=tuple(s for s in args.sources.split(",") if s),
        )
        metrics = None
        if args.metrics:
            metrics = evaluation.MetricsSummary.from_dict(json.loads(Path(args.metrics).read_text()))
        series = {}
        for spec in args.series:
            name, _, path = spec.partition("=")
            if not name or not path:
                raise BoxforgeError(f"bad --series {spec!r}; expected name=path")
            series[name] = ledger_mod.read_series_csv(path)
        record = book.record_iteration(config, idx, metrics, series)
        sys.stdout.write(
            f"recorded {record.config.iteration_id!r}: "
            f"train {record.train_count} / val {record.val_count}\n"
        )
        return CommandOutcome(0, book.path)
    if args.ledger_command == "compare":
        rows = book.compare(args.ids)
        path = _emit({"rows": rows}, args.out)
        if args.out:
            return CommandOutcome(0, path)
        return CommandOutcome(0)
    if args.ledger_command == "lineage":
        chain = book.lineage(args.iteration_id)
        sys.stdout.write(" -> ".join(chain) + "\n")
        return CommandOutcome(0)
    raise _UsageError(parser, "missing ledger action")


_COMMANDS = {
    "index": _cmd_index,
    "split": _cmd_split,
    "crop": _cmd_crop,
    "diagnose": _cmd_diagnose,
    "eval": _cmd_eval,
    "import": _cmd_import,
    "serve": _cmd_serve,
    "export": _cmd_export,
}


def run(argv: list[str]) -> CommandOutcome:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise _UsageError(parser, "a subcommand is required")
        if args.command == "ledger":
            return _cmd_ledger(args, parser)
        return _COMMANDS[args.command](args)
    except _UsageError as exc:
        exc.parser.print_usage(sys.stderr)
        sys.stderr.write(f"error: {exc}\n")
        return CommandOutcome(1)
    except (BoxforgeError, ValueError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return CommandOutcome(1)
    except OSError as exc:
        sys.stderr.write(f"i/o error: {exc}\n")
        return CommandOutcome(2)


def main() -> None:
    try:
        outcome = run(sys.argv[1:])
    except SystemExit as exc:  # argparse --help
        raise exc
    sys.exit(outcome.exit_code)


if __name__ == "__main__":
    main()
