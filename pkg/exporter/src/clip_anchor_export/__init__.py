"""Export text-encoder category embeddings as anchor-file JSON."""

from .cifar100 import CIFAR100_LABELS, CIFAR100_SUPERCATEGORIES, supercategory_map
from .export import (
    ENCODER_CHECKPOINTS,
    ExporterError,
    ExportRequest,
    HFClipTextEncoder,
    export_anchors,
    sentences_for,
)

__version__ = "0.1.0"
