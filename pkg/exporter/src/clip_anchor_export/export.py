"""Encode category names with a text encoder and write anchor-file JSON.

The output conforms to anchor-file version 1 as consumed by the training
toolkit: unit-norm vectors, one per label, with the encoder and prompt
recorded as provenance.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

ANCHOR_FILE_VERSION = 1

# Friendly encoder names to hugging-face checkpoints. The ResNet CLIP
# variants were never published in this format; they need a local conversion
# and are listed here so the error message can say so.
ENCODER_CHECKPOINTS = {
    "ViT-B/32": "openai/clip-vit-base-patch32",
    "ViT-B/16": "openai/clip-vit-base-patch16",
    "ViT-L/14": "openai/clip-vit-large-patch14",
}
UNSUPPORTED_ENCODERS = ("RN50x4", "RN50x16")


class ExporterError(RuntimeError):
    """Anything that prevents producing a valid anchor file."""


@dataclass(frozen=True)
class ExportRequest:
    encoder_name: str
    prompt_template: str
    labels: list[str]
    output_path: str

    def __post_init__(self):
        if self.prompt_template.count("{}") != 1:
            raise ExporterError(
                f"prompt template must contain exactly one '{{}}' placeholder, "
                f"got {self.prompt_template!r}"
            )
        if not self.labels:
            raise ExporterError("labels must be non-empty")
        if len(set(self.labels)) != len(self.labels):
            dupes = sorted({x for x in self.labels if self.labels.count(x) > 1})
            raise ExporterError(f"duplicate labels: {dupes}")


def sentences_for(request: ExportRequest) -> list[str]:
    """Prompt sentences, with underscores in label names read as spaces."""
    return [request.prompt_template.format(name.replace("_", " "))
            for name in request.labels]


class HFClipTextEncoder:
    """Text tower of a CLIP checkpoint via transformers, eval mode, CPU."""

    def __init__(self, encoder_name: str):
        checkpoint = ENCODER_CHECKPOINTS.get(encoder_name, encoder_name)
        if encoder_name in UNSUPPORTED_ENCODERS:
            raise ExporterError(
                f"encoder {encoder_name!r} has no published text-tower "
                f"checkpoint in this format; convert it locally and pass the "
                f"directory path instead"
            )
        try:
            from transformers import CLIPTextModelWithProjection, CLIPTokenizerFast
        except ImportError as e:
            raise ExporterError(f"transformers is not installed: {e}") from e
        try:
            self.tokenizer = CLIPTokenizerFast.from_pretrained(checkpoint)
            self.model = CLIPTextModelWithProjection.from_pretrained(checkpoint)
        except Exception as e:
            raise ExporterError(
                f"cannot load encoder {encoder_name!r} (checkpoint "
                f"{checkpoint!r}): {e}. Download it on a connected machine "
                f"with huggingface-cli, or pass a local checkpoint directory."
            ) from e
        self.model.eval()
        self.name = encoder_name

    def encode(self, sentences: list[str]) -> np.ndarray:
        import torch

        with torch.no_grad():
            embeds = []
            for start in range(0, len(sentences), 64):
                batch = sentences[start : start + 64]
                inputs = self.tokenizer(batch, padding=True, return_tensors="pt")
                embeds.append(self.model(**inputs).text_embeds)
            return torch.cat(embeds).double().cpu().numpy()


def export_anchors(request: ExportRequest, encoder=None) -> dict:
    """Encode every label and write the anchor file; returns the document.

    `encoder` defaults to the checkpoint named in the request; anything with
    an ``encode(sentences) -> (N, n) array`` and a ``name`` works.
    """
    if encoder is None:
        encoder = HFClipTextEncoder(request.encoder_name)
    vectors = np.asarray(encoder.encode(sentences_for(request)), dtype=np.float64)
    if vectors.ndim != 2 or vectors.shape[0] != len(request.labels):
        raise ExporterError(
            f"encoder returned shape {vectors.shape} for "
            f"{len(request.labels)} labels"
        )
    norms = np.linalg.norm(vectors, axis=1)
    if np.any(norms < 1e-12):
        raise ExporterError("encoder produced a zero embedding")
    vectors = vectors / norms[:, None]
    doc = {
        "version": ANCHOR_FILE_VERSION,
        "dim": int(vectors.shape[1]),
        "labels": list(request.labels),
        "vectors": [row.tolist() for row in vectors],
        "source": f"{getattr(encoder, 'name', request.encoder_name)} text encoder",
        "prompt": request.prompt_template,
        "expanded": False,
    }
    Path(request.output_path).write_text(json.dumps(doc), encoding="utf-8")
    return doc
