"""boxforge: dataset engineering and evaluation around an external detector.

The toolkit covers everything an iterative detector bootstrap needs except
the training run itself: label-file parsing and indexing, box geometry,
detection metrics, region-of-interest cropping, deterministic splits with an
iteration ledger, and a human review service for machine pre-labels.
"""
from .errors import BoxforgeError
from .evaluation import Detection, MatchResult, MetricsSummary, evaluate, nms
from .geometry import LetterboxTransform, PixelBox, iou, letterbox, remap_into_crop
from .labels import (
    DatasetIndex,
    ImageDims,
    LabeledImage,
    NormalizedBox,
    index_dataset,
    parse_label_file,
    serialize_label_file,
)

__version__ = "0.1.0"

__all__ = [
    "BoxforgeError",
    "DatasetIndex",
    "Detection",
    "ImageDims",
    "LabeledImage",
    "LetterboxTransform",
    "MatchResult",
    "MetricsSummary",
    "NormalizedBox",
    "PixelBox",
    "evaluate",
    "index_dataset",
    "iou",
    "letterbox",
    "nms",
    "parse_label_file",
    "remap_into_crop",
    "serialize_label_file",
    "__version__",
]
