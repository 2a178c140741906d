"""Anchor sets on the unit hypersphere: construction, statistics, and remapping.

An anchor is a unit-norm embedding vector standing in for one category. This
module builds anchor sets (regular-simplex anchors, clustered samples),
measures how crowded they are (pairwise cosine statistics), and remaps
clustered sets so their polar angles about the cluster center stretch over a
hemisphere while azimuthal directions, and therefore neighborhood structure,
stay fixed.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "GeometryError",
    "AnchorSet",
    "CosStats",
    "PlanarRotation",
    "ExpansionModel",
    "compute_cos_stats",
    "make_rotation",
    "fit_expansion",
    "expand",
    "expand_novel",
    "generate_mmc_anchors",
    "sample_clustered_anchors",
    "pole_vector",
]

UNIT_ATOL = 1e-6
_DEGENERATE = 1e-9


class GeometryError(ValueError):
    """A geometric precondition was violated (degenerate or malformed input)."""


def _check_unit_rows(vectors: np.ndarray, atol: float = UNIT_ATOL) -> None:
    norms = np.linalg.norm(vectors, axis=-1)
    worst = float(np.max(np.abs(norms - 1.0)))
    if worst > atol:
        raise GeometryError(f"rows must be unit l2-norm (worst deviation {worst:.3e})")


def pole_vector(n: int) -> np.ndarray:
    """First basis vector [1, 0, ..., 0], the reference pole for polar angles."""
    p = np.zeros(n, dtype=np.float64)
    p[0] = 1.0
    return p


@dataclass(frozen=True)
class AnchorSet:
    """Labeled matrix of unit-norm anchor vectors with provenance.

    vectors has shape (N, n): one row per category, each row unit l2-norm
    within 1e-6. Labels are distinct category names.
    """

    labels: list[str]
    vectors: np.ndarray
    source: str = ""

    def __post_init__(self):
        vectors = np.ascontiguousarray(np.asarray(self.vectors, dtype=np.float64))
        if vectors.ndim != 2:
            raise GeometryError(f"vectors must be a 2-D matrix, got shape {vectors.shape}")
        n_anchors, dim = vectors.shape
        if n_anchors < 1:
            raise GeometryError("need at least one anchor")
        if dim < 2:
            raise GeometryError(f"embedding dimension must be >= 2, got {dim}")
        if len(self.labels) != n_anchors:
            raise GeometryError(
                f"{len(self.labels)} labels for {n_anchors} vectors"
            )
        if len(set(self.labels)) != len(self.labels):
            raise GeometryError("labels must be distinct")
        _check_unit_rows(vectors)
        object.__setattr__(self, "labels", list(self.labels))
        object.__setattr__(self, "vectors", vectors)

    @property
    def num_anchors(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def index_of(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise GeometryError(f"unknown anchor label {label!r}") from None


@dataclass(frozen=True)
class CosStats:
    """Pairwise cosine-similarity statistics of an anchor set."""

    mean_offdiag_cos: float
    max_offdiag_cos: float
    min_offdiag_cos: float
    pairwise: np.ndarray = field(repr=False)


def compute_cos_stats(anchors: AnchorSet) -> CosStats:
    """Mean/max/min over the N(N-1)/2 distinct off-diagonal cosines."""
    if anchors.num_anchors < 2:
        raise GeometryError("need at least two anchors")
    v = anchors.vectors
    pairwise = v @ v.T
    pairwise = np.clip((pairwise + pairwise.T) / 2.0, -1.0, 1.0)
    np.fill_diagonal(pairwise, 1.0)
    iu = np.triu_indices(anchors.num_anchors, k=1)
    off = pairwise[iu]
    return CosStats(
        mean_offdiag_cos=float(off.mean()),
        max_offdiag_cos=float(off.max()),
        min_offdiag_cos=float(off.min()),
        pairwise=pairwise,
    )


class PlanarRotation:
    """Orthogonal map rotating `start` onto `end` inside span{start, end}.

    Acts as the identity on the orthogonal complement of the plane, so it
    stores two n-vectors instead of an n-by-n matrix and applies in O(n).
    """

    def __init__(self, start: np.ndarray, end: np.ndarray):
        start = np.asarray(start, dtype=np.float64)
        end = np.asarray(end, dtype=np.float64)
        if start.shape != end.shape or start.ndim != 1:
            raise GeometryError("rotation endpoints must be 1-D vectors of equal length")
        _check_unit_rows(start[None, :])
        _check_unit_rows(end[None, :])
        cos_t = float(np.clip(start @ end, -1.0, 1.0))
        if cos_t < -1.0 + 1e-9:
            raise GeometryError("antipodal rotation ill-defined")
        residual = end - cos_t * start
        sin_t = float(np.linalg.norm(residual))
        self.u = start
        self.cos_t = cos_t
        self.sin_t = sin_t
        # Identity when start == end; the plane has no second direction.
        self.w = residual / sin_t if sin_t > _DEGENERATE else None

    @property
    def dim(self) -> int:
        return self.u.shape[0]

    def _apply(self, x: np.ndarray, sign: float) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.dim:
            raise GeometryError(f"expected vectors of dimension {self.dim}, got {x.shape[-1]}")
        if self.w is None:
            return x.copy()
        a = x @ self.u
        b = x @ self.w
        c, s = self.cos_t, sign * self.sin_t
        return (
            x
            + np.multiply.outer((c - 1.0) * a - s * b, self.u)
            + np.multiply.outer(s * a + (c - 1.0) * b, self.w)
        )

    def apply(self, x: np.ndarray) -> np.ndarray:
        """Rotate vector(s); accepts a single vector or a stack of rows."""
        return self._apply(x, 1.0)

    def apply_inverse(self, x: np.ndarray) -> np.ndarray:
        """Transpose (= inverse) of the rotation."""
        return self._apply(x, -1.0)

    def as_matrix(self) -> np.ndarray:
        """Dense n-by-n form, for diagnostics and small-n checks only."""
        return self.apply(np.eye(self.dim)).T


def make_rotation(start: np.ndarray, end: np.ndarray) -> PlanarRotation:
    """Orthogonal map with map(start) = end. Rejects antipodal endpoints."""
    return PlanarRotation(start, end)


@dataclass(frozen=True)
class ExpansionModel:
    """Fitted parameters of the polar-angle expansion.

    center is the normalized anchor sum v, phi0 the largest polar angle
    arccos<a_i, v> seen at fit time, and rotation maps center onto the pole
    [1, 0, ..., 0]. The model is reusable on anchors of novel categories.
    """

    center: np.ndarray
    phi0: float
    rotation: PlanarRotation
    n: int

    def __post_init__(self):
        center = np.asarray(self.center, dtype=np.float64)
        _check_unit_rows(center[None, :])
        if not 0.0 < self.phi0 <= np.pi:
            raise GeometryError(f"phi0 must lie in (0, pi], got {self.phi0}")
        if center.shape[0] != self.n:
            raise GeometryError("center dimension disagrees with n")
        pole = pole_vector(self.n)
        if np.max(np.abs(self.rotation.apply(center) - pole)) > UNIT_ATOL:
            raise GeometryError("rotation does not map center to the pole")
        object.__setattr__(self, "center", center)


def fit_expansion(anchors: AnchorSet) -> ExpansionModel:
    """Fit center, rotation, and maximal polar angle phi0 on an anchor set.

    Warns when phi0 >= pi/2: the set is wider than a quarter sphere and the
    remap will contract angles toward pi/2 instead of expanding them.
    """
    if anchors.num_anchors < 2:
        raise GeometryError("need at least two anchors")
    total = anchors.vectors.sum(axis=0)
    norm = np.linalg.norm(total)
    if norm < _DEGENERATE:
        raise GeometryError("degenerate center")
    center = total / norm
    cosines = np.clip(anchors.vectors @ center, -1.0, 1.0)
    phi0 = float(np.max(np.arccos(cosines)))
    if phi0 < _DEGENERATE:
        raise GeometryError("all anchors coincide with center")
    if phi0 >= np.pi / 2:
        warnings.warn(
            f"largest polar angle {phi0:.3f} rad >= pi/2; "
            "remap will contract the set toward the pi/2 cap",
            stacklevel=2,
        )
    rotation = make_rotation(center, pole_vector(anchors.dim))
    return ExpansionModel(center=center, phi0=phi0, rotation=rotation, n=anchors.dim)


def _remap_rows(vectors: np.ndarray, model: ExpansionModel) -> np.ndarray:
    """Closed-form polar remap of unit rows about model.center.

    Each row with polar angle phi = arccos<a, v> moves to angle
    phi_bar = min(pi/2 * phi / phi0, pi) along its own azimuthal direction
    u = (a - <a,v> v) / ||a - <a,v> v||:  out = cos(phi_bar) v + sin(phi_bar) u.
    Rows sitting exactly on +-v have no azimuth; they are valid only where
    sin(phi_bar) vanishes as well.
    """
    v = model.center
    cosines = np.clip(vectors @ v, -1.0, 1.0)
    phi = np.arccos(cosines)
    phi_bar = np.minimum((np.pi / 2.0) * phi / model.phi0, np.pi)
    residual = vectors - np.multiply.outer(cosines, v)
    res_norm = np.linalg.norm(residual, axis=1)
    degenerate = res_norm < _DEGENERATE
    if np.any(degenerate & (phi > 1e-6)):
        raise GeometryError(
            "antipodal anchor: azimuthal direction undefined"
        )
    safe = np.where(degenerate, 1.0, res_norm)
    azimuth = residual / safe[:, None]
    out = np.multiply.outer(np.cos(phi_bar), v) + np.sin(phi_bar)[:, None] * azimuth
    # cos^2 + sin^2 with orthonormal v, u: rows are unit by construction.
    # An anchor on the center itself is an exact fixed point (phi = 0).
    out[degenerate] = v
    return out


def expand(anchors: AnchorSet, model: ExpansionModel) -> AnchorSet:
    """Remap an anchor set with a fitted expansion model.

    The anchor that attained phi0 lands at polar angle pi/2 (orthogonal to the
    center); the ordering of polar angles is preserved.
    """
    if anchors.dim != model.n:
        raise GeometryError(
            f"anchor dimension {anchors.dim} does not match model dimension {model.n}"
        )
    out = _remap_rows(anchors.vectors, model)
    return AnchorSet(
        labels=list(anchors.labels),
        vectors=out,
        source=f"expanded({anchors.source})" if anchors.source else "expanded",
    )


def expand_novel(anchor: np.ndarray, model: ExpansionModel) -> np.ndarray:
    """Remap a single novel-category anchor with pre-fitted parameters.

    Novel anchors may lie outside the training cap (phi > phi0); their target
    angle pi/2 * phi / phi0 is clamped at pi. Anchors antipodal to the center
    are rejected: their azimuthal direction is undefined.
    """
    anchor = np.asarray(anchor, dtype=np.float64)
    if anchor.ndim != 1 or anchor.shape[0] != model.n:
        raise GeometryError(f"expected a vector of dimension {model.n}")
    norm = np.linalg.norm(anchor)
    if norm < _DEGENERATE:
        raise GeometryError("zero-vector anchor")
    _check_unit_rows(anchor[None, :])
    return _remap_rows(anchor[None, :], model)[0]


def generate_mmc_anchors(num_classes: int, dim: int) -> AnchorSet:
    """Regular-simplex anchors: N unit vectors with pairwise cosine -1/(N-1).

    Closed-form construction of N equiangular points in the first N-1
    coordinates, zero-padded to `dim`. Requires dim >= N-1.
    """
    if num_classes < 2:
        raise GeometryError("need at least two classes")
    if dim < num_classes - 1:
        raise GeometryError("dimension too small for simplex")
    if dim < 2:
        raise GeometryError("embedding dimension must be >= 2")
    k = num_classes - 1
    vectors = np.zeros((num_classes, dim), dtype=np.float64)
    vectors[0, :k] = 1.0 / np.sqrt(k)
    shift = -(1.0 + np.sqrt(k + 1.0)) / k**1.5
    scale = np.sqrt((k + 1.0) / k)
    vectors[1:, :k] = shift
    vectors[1:, :k] += scale * np.eye(k)
    # Rows drift from unit norm only by float error; tidy them up.
    vectors /= np.linalg.norm(vectors, axis=1, keepdims=True)
    width = max(3, len(str(num_classes - 1)))
    labels = [f"class_{i:0{width}d}" for i in range(num_classes)]
    return AnchorSet(labels=labels, vectors=vectors, source="mmc")


def sample_clustered_anchors(
    num: int,
    dim: int,
    spread: float,
    seed: int,
    center: np.ndarray | None = None,
    labels: list[str] | None = None,
) -> AnchorSet:
    """Unit vectors clustered in a cap: normalize(center + spread * gaussian).

    Small `spread` gives a tight cap with high mean pairwise cosine; used to
    build synthetic stand-ins for crowded text-embedding anchors.
    """
    if num < 1:
        raise GeometryError("need at least one anchor")
    if spread <= 0:
        raise GeometryError("spread must be positive")
    rng = np.random.default_rng(seed)
    if center is None:
        center = rng.standard_normal(dim)
        center /= np.linalg.norm(center)
    else:
        center = np.asarray(center, dtype=np.float64)
        _check_unit_rows(center[None, :])
    raw = center[None, :] + spread * rng.standard_normal((num, dim))
    raw /= np.linalg.norm(raw, axis=1, keepdims=True)
    if labels is None:
        width = max(3, len(str(num - 1)))
        labels = [f"class_{i:0{width}d}" for i in range(num)]
    return AnchorSet(labels=labels, vectors=raw, source=f"cap(spread={spread})")
