"""Shared fixtures: random box generators and tiny on-disk dataset trees."""
from __future__ import annotations

import random
from pathlib import Path

import pytest
from PIL import Image

from boxforge.labels import ImageDims, NormalizedBox


@pytest.fixture
def rng() -> random.Random:
    return random.Random(20240711)


def random_box(rng: random.Random, class_id: int = 0, margin: float = 1e-3) -> NormalizedBox:
    """A valid box whose extent stays strictly inside the frame."""
    w = rng.uniform(0.01, 0.6)
    h = rng.uniform(0.01, 0.6)
    cx = rng.uniform(w / 2 + margin, 1 - w / 2 - margin)
    cy = rng.uniform(h / 2 + margin, 1 - h / 2 - margin)
    return NormalizedBox(class_id, cx, cy, w, h)


def random_dims(rng: random.Random, lo: int = 32, hi: int = 4096) -> ImageDims:
    return ImageDims(rng.randint(lo, hi), rng.randint(lo, hi))


def write_png(path: Path, width: int, height: int, color=(90, 90, 90)) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.new("RGB", (width, height), color).save(path)
    return path
