"""Iteration ledger: deterministic splits, run records, weight lineage, comparison.

Training itself happens elsewhere; the ledger records what each loop trained
on (dataset sources, split, parent weights) and what came back (metrics,
exported loss curves) so runs stay comparable across the whole bootstrap.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from .errors import LedgerError, SplitError
from .evaluation import MetricsSummary
from .labels import DatasetIndex

MANIFEST_VERSION = 1

# Weight tags that mean "the run recorded immediately before this one".
PREVIOUS_RUN_TAGS = frozenset({"last.pt"})


def _round_half_up(x: float) -> int:
    return math.floor(x + 0.5)


def _hash_key(seed: int, image_id: str) -> str:
    return hashlib.sha256(f"{seed}-{image_id}".encode("utf-8")).hexdigest()


def split(
    index: DatasetIndex,
    ratio: float,
    seed: int,
    stratify_by_top_dir: bool = False,
) -> tuple[list[str], list[str]]:
    """Partition the labeled+negative entries into (train ids, val ids).

    Validation membership is decided by ranking a seeded hash of each image
    id, so the partition depends on the id set and seed only, never on entry
    order. The validation size is round-half-up of N*ratio. Optional
    stratification applies the quota per top-level directory instead.
    """
    if not (0.0 < ratio < 1.0):
        raise SplitError(f"ratio must be in (0, 1), got {ratio}")
    eligible = [e.image_id for e in index.entries if e.label_state != "unlabeled"]
    if not eligible:
        raise SplitError("no labeled or negative entries to split")

    n_val_total = _round_half_up(len(eligible) * ratio)
    if n_val_total == 0 or n_val_total == len(eligible):
        raise SplitError(
            f"degenerate split: {n_val_total} of {len(eligible)} entries in validation"
        )

    if stratify_by_top_dir:
        groups: dict[str, list[str]] = {}
        for image_id in eligible:
            top = image_id.split("/", 1)[0] if "/" in image_id else ""
            groups.setdefault(top, []).append(image_id)
        group_list = [groups[k] for k in sorted(groups)]
    else:
        group_list = [eligible]

    train: list[str] = []
    val: list[str] = []
    for ids in group_list:
        ranked = sorted(ids, key=lambda i: (_hash_key(seed, i), i))
        n_val = _round_half_up(len(ids) * ratio) if stratify_by_top_dir else n_val_total
        val.extend(ranked[:n_val])
        train.extend(ranked[n_val:])
    return sorted(train), sorted(val)


@dataclass(frozen=True)
class IterationConfig:
    """External-training parameters worth pinning for one loop."""

    iteration_id: str
    input_side: int
    batch_size: int
    split_ratio: float
    split_seed: int
    parent_weights: str
    dataset_sources: tuple[str, ...]

    def __post_init__(self):
        if not self.iteration_id:
            raise LedgerError("iteration_id must be non-empty")
        if not (0.0 < self.split_ratio < 1.0):
            raise LedgerError(f"split_ratio must be in (0, 1), got {self.split_ratio}")
        if not self.parent_weights:
            raise LedgerError("parent_weights must be non-empty")

    def to_dict(self) -> dict:
        return {
            "iteration_id": self.iteration_id,
            "input_side": self.input_side,
            "batch_size": self.batch_size,
            "split_ratio": self.split_ratio,
            "split_seed": self.split_seed,
            "parent_weights": self.parent_weights,
            "dataset_sources": list(self.dataset_sources),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "IterationConfig":
        return cls(
            iteration_id=d["iteration_id"],
            input_side=int(d["input_side"]),
            batch_size=int(d["batch_size"]),
            split_ratio=float(d["split_ratio"]),
            split_seed=int(d["split_seed"]),
            parent_weights=d["parent_weights"],
            dataset_sources=tuple(d["dataset_sources"]),
        )


Series = tuple[tuple[float, float], ...]


def _validate_series(name: str, series: Sequence[tuple[float, float]]) -> Series:
    steps = [s for s, _ in series]
    if any(b <= a for a, b in zip(steps, steps[1:])):
        raise LedgerError(f"series {name!r}: steps must be strictly increasing")
    return tuple((float(s), float(v)) for s, v in series)


@dataclass(frozen=True)
class IterationRecord:
    config: IterationConfig
    train_count: int
    val_count: int
    metrics: MetricsSummary | None
    external_series: dict[str, Series] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "train_count": self.train_count,
            "val_count": self.val_count,
            "metrics": self.metrics.to_dict() if self.metrics else None,
            "external_series": {
                name: [list(p) for p in series]
                for name, series in self.external_series.items()
            },
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "IterationRecord":
        metrics = d.get("metrics")
        return cls(
            config=IterationConfig.from_dict(d["config"]),
            train_count=int(d["train_count"]),
            val_count=int(d["val_count"]),
            metrics=MetricsSummary.from_dict(metrics) if metrics else None,
            external_series={
                name: tuple((float(s), float(v)) for s, v in series)
                for name, series in d.get("external_series", {}).items()
            },
        )


class Ledger:
    """Append-only record of guideline iterations backed by one JSON manifest."""

    def __init__(self, path: Path | str):
        self.path = Path(path)
        self.datasets: dict[str, str] = {}
        self.iterations: list[IterationRecord] = []

    @classmethod
    def load(cls, path: Path | str) -> "Ledger":
        ledger = cls(path)
        p = Path(path)
        if not p.exists():
            return ledger
        doc = json.loads(p.read_text())
        version = doc.get("version")
        if version != MANIFEST_VERSION:
            raise LedgerError(f"unsupported manifest version {version!r}")
        ledger.datasets = dict(doc.get("datasets", {}))
        ledger.iterations = [IterationRecord.from_dict(r) for r in doc.get("iterations", [])]
        return ledger

    def save(self) -> None:
        doc = {
            "version": MANIFEST_VERSION,
            "datasets": self.datasets,
            "iterations": [r.to_dict() for r in self.iterations],
        }
        tmp = self.path.with_suffix(self.path.suffix + ".tmp")
        self.path.parent.mkdir(parents=True, exist_ok=True)
        tmp.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
        tmp.replace(self.path)

    def add_dataset(self, dataset_id: str, root: str) -> None:
        if not dataset_id:
            raise LedgerError("dataset id must be non-empty")
        self.datasets[dataset_id] = root

    def get(self, iteration_id: str) -> IterationRecord:
        for r in self.iterations:
            if r.config.iteration_id == iteration_id:
                return r
        raise LedgerError(f"unknown iteration {iteration_id!r}")

    def record_iteration(
        self,
        config: IterationConfig,
        index: DatasetIndex,
        metrics: MetricsSummary | None = None,
        series: Mapping[str, Sequence[tuple[float, float]]] | None = None,
    ) -> IterationRecord:
        """Persist one loop: config, derived split sizes, ingested metrics/curves.

        Split sizes are derived from the eligible entry count and the config's
        ratio, which is exactly what split() would produce for any seed.
        """
        if any(r.config.iteration_id == config.iteration_id for r in self.iterations):
            raise LedgerError(f"duplicate iteration id {config.iteration_id!r}")
        unknown = [s for s in config.dataset_sources if s not in self.datasets]
        if unknown:
            raise LedgerError(f"unknown dataset ids: {', '.join(unknown)}")

        eligible = sum(1 for e in index.entries if e.label_state != "unlabeled")
        val_count = _round_half_up(eligible * config.split_ratio)
        validated_series = {
            name: _validate_series(name, s) for name, s in (series or {}).items()
        }
        record = IterationRecord(
            config=config,
            train_count=eligible - val_count,
            val_count=val_count,
            metrics=metrics,
            external_series=validated_series,
        )
        self.iterations.append(record)
        self.save()
        return record

    def lineage(self, iteration_id: str) -> list[str]:
        """Weight ancestry of a run: iteration ids back to the external root tag."""
        by_id = {r.config.iteration_id: r for r in self.iterations}
        order = [r.config.iteration_id for r in self.iterations]
        chain = [iteration_id]
        current = self.get(iteration_id)
        seen = {iteration_id}
        while True:
            parent = current.config.parent_weights
            if parent in PREVIOUS_RUN_TAGS:
                pos = order.index(current.config.iteration_id)
                if pos == 0:
                    raise LedgerError(
                        f"{current.config.iteration_id!r} inherits from a previous run but is the first record"
                    )
                parent = order[pos - 1]
            if parent in by_id:
                if parent in seen:
                    raise LedgerError(f"weight lineage cycle at {parent!r}")
                seen.add(parent)
                chain.append(parent)
                current = by_id[parent]
                continue
            chain.append(parent)  # external root such as a pretrained checkpoint
            return chain

    def compare(self, ids: Sequence[str]) -> list[dict]:
        """Aligned metric rows for the named iterations; absent values stay None."""
        rows = []
        series_names = sorted(
            {name for i in ids for name in self.get(i).external_series}
        )
        for iteration_id in ids:
            r = self.get(iteration_id)
            row: dict = {
                "iteration_id": iteration_id,
                "train_count": r.train_count,
                "val_count": r.val_count,
                "ap50": r.metrics.ap50 if r.metrics else None,
                "ap50_95": r.metrics.ap50_95 if r.metrics else None,
                "best_f1": r.metrics.best_f1 if r.metrics else None,
            }
            for name in series_names:
                series = r.external_series.get(name)
                row[f"final_{name}"] = series[-1][1] if series else None
            rows.append(row)
        return rows


def read_series_csv(path: Path | str) -> Series:
    """Load an exported loss curve: CSV with header `step,value`."""
    lines = [l.strip() for l in Path(path).read_text().splitlines() if l.strip()]
    if not lines or lines[0].replace(" ", "") != "step,value":
        raise LedgerError(f"{path}: expected header 'step,value'")
    points = []
    for i, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != 2:
            raise LedgerError(f"{path}:{i}: expected 'step,value'")
        try:
            points.append((float(parts[0]), float(parts[1])))
        except ValueError:
            raise LedgerError(f"{path}:{i}: non-numeric row {line!r}") from None
    return _validate_series(str(path), points)
