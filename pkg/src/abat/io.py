"""File formats: anchor JSON (version 1), model manifests, curves, datasets.

The anchor file is the interoperability surface of the toolkit: a UTF-8 JSON
document with unit-norm vectors, optional prompt provenance, and optional
expansion parameters sufficient to remap novel-category anchors later.
"""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .geometry import AnchorSet, ExpansionModel, make_rotation, pole_vector
from .numerics import FeatureEncoder
from .training import CurvePoint, LearningCurve, SyntheticDataset

ANCHOR_FILE_VERSION = 1
_RENORM_SILENT = 1e-4
_RENORM_WARN = 1e-2


class AnchorFileError(ValueError):
    """Malformed anchor file (missing keys, wrong shapes, bad JSON)."""

    code = "format"


class AnchorFileVersionError(AnchorFileError):
    """Unsupported anchor file version."""

    code = "version"


class AnchorFileNormError(AnchorFileError):
    """Vector norms too far from 1 to repair."""

    code = "norm"


@dataclass(frozen=True)
class LoadedAnchors:
    anchors: AnchorSet
    expansion: ExpansionModel | None
    expanded: bool
    prompt: str | None


def save_anchor_file(path, anchors: AnchorSet, *, prompt: str | None = None,
                     expansion: ExpansionModel | None = None,
                     expanded: bool = False) -> None:
    doc = {
        "version": ANCHOR_FILE_VERSION,
        "dim": anchors.dim,
        "labels": list(anchors.labels),
        "vectors": [row.tolist() for row in anchors.vectors],
        "source": anchors.source,
        "expanded": bool(expanded),
    }
    if prompt is not None:
        doc["prompt"] = prompt
    if expansion is not None:
        doc["expansion_params"] = {
            "center": expansion.center.tolist(),
            "phi0": float(expansion.phi0),
        }
    Path(path).write_text(json.dumps(doc), encoding="utf-8")


def load_anchor_file(path) -> LoadedAnchors:
    """Parse and validate an anchor file.

    Norm deviations up to 1e-4 are repaired silently, up to 1e-2 with a
    warning; anything worse is rejected.
    """
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise AnchorFileError(f"not valid JSON: {e}") from e
    if not isinstance(doc, dict):
        raise AnchorFileError("top level must be a JSON object")
    version = doc.get("version")
    if version != ANCHOR_FILE_VERSION:
        raise AnchorFileVersionError(
            f"unsupported anchor file version {version!r} "
            f"(expected {ANCHOR_FILE_VERSION})"
        )
    for key in ("dim", "labels", "vectors", "source"):
        if key not in doc:
            raise AnchorFileError(f"missing key {key!r}")
    labels = doc["labels"]
    vectors = doc["vectors"]
    if not isinstance(labels, list) or not all(isinstance(s, str) for s in labels):
        raise AnchorFileError("labels must be a list of strings")
    if len(labels) != len(vectors):
        raise AnchorFileError(
            f"{len(labels)} labels for {len(vectors)} vectors"
        )
    try:
        mat = np.asarray(vectors, dtype=np.float64)
    except (TypeError, ValueError) as e:
        raise AnchorFileError(f"vectors are not numeric: {e}") from e
    if mat.ndim != 2 or mat.shape[1] != doc["dim"]:
        raise AnchorFileError(
            f"vector block of shape {mat.shape} does not match dim {doc['dim']}"
        )
    norms = np.linalg.norm(mat, axis=1)
    worst = float(np.max(np.abs(norms - 1.0))) if mat.size else 0.0
    if worst > _RENORM_WARN:
        raise AnchorFileNormError(
            f"vector norms deviate from 1 by up to {worst:.3e} (limit {_RENORM_WARN})"
        )
    if worst > _RENORM_SILENT:
        warnings.warn(
            f"anchor norms off by up to {worst:.3e}; re-normalizing", stacklevel=2
        )
    if np.any(norms < 1e-12):
        raise AnchorFileNormError("zero-norm vector in anchor file")
    mat = mat / norms[:, None]
    anchors = AnchorSet(labels=labels, vectors=mat, source=doc["source"])

    expansion = None
    params = doc.get("expansion_params")
    if params is not None:
        try:
            center = np.asarray(params["center"], dtype=np.float64)
            phi0 = float(params["phi0"])
        except (KeyError, TypeError, ValueError) as e:
            raise AnchorFileError(f"bad expansion_params: {e}") from e
        if center.shape != (anchors.dim,):
            raise AnchorFileError(
                f"expansion center of shape {center.shape} for dim {anchors.dim}"
            )
        center = center / np.linalg.norm(center)
        expansion = ExpansionModel(
            center=center,
            phi0=phi0,
            rotation=make_rotation(center, pole_vector(anchors.dim)),
            n=anchors.dim,
        )
    return LoadedAnchors(
        anchors=anchors,
        expansion=expansion,
        expanded=bool(doc.get("expanded", False)),
        prompt=doc.get("prompt"),
    )


# ---------------------------------------------------------------------------
# model manifests


def save_model(path, encoder: FeatureEncoder, meta: dict | None = None) -> None:
    doc = {"format": 1, "kind": "mlp", **encoder.state()}
    if meta:
        doc["meta"] = meta
    Path(path).write_text(json.dumps(doc), encoding="utf-8")


def load_model(path) -> FeatureEncoder:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("format") != 1 or doc.get("kind") != "mlp":
        raise ValueError(f"unsupported model file {path}")
    return FeatureEncoder.from_state(doc)


# ---------------------------------------------------------------------------
# learning curves

CURVE_COLUMNS = ("epoch", "train_loss", "clean_acc", "robust_acc")


def save_curve_csv(path, curve: LearningCurve) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CURVE_COLUMNS)
        for p in curve:
            writer.writerow([p.epoch, repr(p.train_loss), repr(p.clean_acc),
                             repr(p.robust_acc)])


def load_curve_csv(path) -> LearningCurve:
    curve = LearningCurve()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader))
        if header != CURVE_COLUMNS:
            raise ValueError(f"unexpected curve header {header}")
        for row in reader:
            curve.append(CurvePoint(
                epoch=int(row[0]),
                train_loss=float(row[1]),
                clean_acc=float(row[2]),
                robust_acc=float(row[3]),
            ))
    return curve


# ---------------------------------------------------------------------------
# datasets


def save_dataset(path, dataset: SyntheticDataset) -> None:
    np.savez(
        path,
        x_train=dataset.x_train,
        y_train=dataset.y_train,
        x_test=dataset.x_test,
        y_test=dataset.y_test,
        class_names=np.asarray(dataset.class_names),
    )


def load_dataset(path) -> SyntheticDataset:
    with np.load(path, allow_pickle=False) as blob:
        return SyntheticDataset(
            x_train=blob["x_train"].astype(np.float64),
            y_train=blob["y_train"].astype(np.intp),
            x_test=blob["x_test"].astype(np.float64),
            y_test=blob["y_test"].astype(np.intp),
            class_names=[str(s) for s in blob["class_names"]],
        )


# ---------------------------------------------------------------------------
# misc inputs


def load_group_map(path) -> dict[str, str]:
    """Label-to-supercategory map from JSON ({label: group}) or text lines
    ("label group" per line, '#' comments allowed)."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if path.suffix.lower() == ".json":
        doc = json.loads(text)
        if not isinstance(doc, dict):
            raise ValueError("group map JSON must be an object")
        return {str(k): str(v) for k, v in doc.items()}
    mapping = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"line {lineno}: expected 'label group', got {line!r}")
        mapping[parts[0]] = parts[1]
    return mapping


def load_config_file(path) -> dict:
    """Experiment config from TOML or JSON, by file extension."""
    path = Path(path)
    if path.suffix.lower() == ".toml":
        try:
            import tomllib
        except ImportError:
            import tomli as tomllib
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    return json.loads(path.read_text(encoding="utf-8"))
