"""Supervision objectives over unit features and fixed anchors.

All losses are built from tape primitives, so gradients flow both to encoder
parameters and, composed with the encoder, to network inputs. Anchors are
constants throughout: only feature arguments are differentiated.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import numerics as nx
from .geometry import AnchorSet

LOSS_KINDS = ("ace", "cos_theta", "theta", "euclid", "cw", "trades_kl")


@dataclass(frozen=True)
class LossKind:
    """Which objective to optimize, with its hyper-parameters.

    tau scales cosine logits for the cross-entropy variant (tau=1 means no
    temperature), kappa is the margin clamp of the CW objective, and
    lambda_inv weights the KL term of the TRADES-style baseline.
    """

    kind: str
    tau: float = 1.0
    kappa: float = 0.0
    lambda_inv: float = 6.0

    def __post_init__(self):
        if self.kind not in LOSS_KINDS:
            raise ValueError(f"unknown loss kind {self.kind!r}; choices: {LOSS_KINDS}")
        if self.tau <= 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if self.lambda_inv < 0:
            raise ValueError(f"lambda_inv must be non-negative, got {self.lambda_inv}")

    @classmethod
    def ace(cls, tau: float = 1.0) -> "LossKind":
        return cls("ace", tau=tau)

    @classmethod
    def cos_theta(cls) -> "LossKind":
        return cls("cos_theta")

    @classmethod
    def theta(cls) -> "LossKind":
        return cls("theta")

    @classmethod
    def euclid(cls) -> "LossKind":
        return cls("euclid")

    @classmethod
    def cw(cls, kappa: float = 0.0) -> "LossKind":
        return cls("cw", kappa=kappa)

    @classmethod
    def trades_kl(cls, lambda_inv: float = 6.0) -> "LossKind":
        return cls("trades_kl", lambda_inv=lambda_inv)


def anchor_matrix(anchors) -> np.ndarray:
    """(N, n) float64 matrix from an AnchorSet or a plain array."""
    if isinstance(anchors, AnchorSet):
        return anchors.vectors
    return np.ascontiguousarray(np.asarray(anchors, dtype=np.float64))


def _labels_in_range(labels, num_anchors: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.intp)
    if np.any((labels < 0) | (labels >= num_anchors)):
        raise ValueError(f"label out of range [0, {num_anchors})")
    return labels


def cosine_logits(tape: nx.Tape, features: nx.Tensor, anchors) -> nx.Tensor:
    """Cosine-similarity logits z @ A^T against constant anchors."""
    mat = anchor_matrix(anchors)
    return nx.matmul(tape, features, nx.Tensor(np.ascontiguousarray(mat.T)))


def ace_loss(tape, features, anchors, labels, tau: float = 1.0) -> nx.Tensor:
    """Mean cross-entropy of softmax over cosine logits (scaled by 1/tau).

    With tau=1 this is exactly -log softmax(z @ A^T)[y], the alignment
    objective that only asks the true-anchor cosine to beat the others.
    """
    if tau <= 0:
        raise ValueError(f"tau must be positive, got {tau}")
    mat = anchor_matrix(anchors)
    labels = _labels_in_range(labels, mat.shape[0])
    logits = cosine_logits(tape, features, mat)
    if tau != 1.0:
        logits = nx.scale(tape, logits, 1.0 / tau)
    picked = nx.gather_rows(tape, logits, labels)
    lse = nx.logsumexp(tape, logits)
    return nx.mean_all(tape, nx.sub(tape, lse, picked))


def cos_theta_loss(tape, features, anchors, labels) -> nx.Tensor:
    """Mean of -<z, a_y>: drive features onto their anchor."""
    mat = anchor_matrix(anchors)
    labels = _labels_in_range(labels, mat.shape[0])
    picked = nx.gather_rows(tape, cosine_logits(tape, features, mat), labels)
    return nx.mean_all(tape, nx.neg(tape, picked))


def theta_loss(tape, features, anchors, labels) -> nx.Tensor:
    """Mean angle arccos<z, a_y> between feature and anchor."""
    mat = anchor_matrix(anchors)
    labels = _labels_in_range(labels, mat.shape[0])
    picked = nx.gather_rows(tape, cosine_logits(tape, features, mat), labels)
    return nx.mean_all(tape, nx.arccos(tape, picked))


def euclid_loss(tape, features, anchors, labels) -> nx.Tensor:
    """Mean squared distance ||z - a_y||^2."""
    mat = anchor_matrix(anchors)
    labels = _labels_in_range(labels, mat.shape[0])
    targets = nx.Tensor(mat[labels])
    diff = nx.sub(tape, features, targets)
    return nx.mean_all(tape, nx.row_dot(tape, diff, diff))


def smoothness_loss(tape, benign_features, adv_features) -> nx.Tensor:
    """Mean of -<z_benign, z_adv>: keep perturbed features aligned with clean ones.

    Label-free; for unit rows the value lies in [-1, 1] and is symmetric in
    its arguments.
    """
    if benign_features.data.shape != adv_features.data.shape:
        raise nx.NumericsError(
            f"smoothness shape mismatch: {benign_features.data.shape} "
            f"vs {adv_features.data.shape}"
        )
    dots = nx.row_dot(tape, benign_features, adv_features)
    return nx.mean_all(tape, nx.neg(tape, dots))


def cw_margin(tape, features, anchors, labels, kappa: float = 0.0) -> nx.Tensor:
    """Mean of max(<z,a_y> - max_{i!=y}<z,a_i>, -kappa).

    An attack drives this margin down; kappa bounds how far past the decision
    boundary the optimization keeps pushing.
    """
    mat = anchor_matrix(anchors)
    if mat.shape[0] < 2:
        raise ValueError("need at least two anchors")
    labels = _labels_in_range(labels, mat.shape[0])
    logits = cosine_logits(tape, features, mat)
    gt = nx.gather_rows(tape, logits, labels)
    runner_up = nx.rowmax_excluding(tape, logits, labels)
    margin = nx.sub(tape, gt, runner_up)
    return nx.mean_all(tape, nx.maximum_scalar(tape, margin, -float(kappa)))


def trades_kl_loss(tape, benign_logits, adv_logits, labels, lambda_inv: float) -> nx.Tensor:
    """Cross-entropy on benign logits plus lambda_inv * KL(p_benign || p_adv).

    Logits are raw cosine similarities. Provided as a comparison baseline;
    lambda_inv = 0 reduces to the plain benign cross-entropy.
    """
    if lambda_inv < 0:
        raise ValueError(f"lambda_inv must be non-negative, got {lambda_inv}")
    if benign_logits.data.shape != adv_logits.data.shape:
        raise nx.NumericsError(
            f"logit shape mismatch: {benign_logits.data.shape} vs {adv_logits.data.shape}"
        )
    labels = _labels_in_range(labels, benign_logits.data.shape[1])
    lse_b = nx.logsumexp(tape, benign_logits)
    picked = nx.gather_rows(tape, benign_logits, labels)
    ce = nx.mean_all(tape, nx.sub(tape, lse_b, picked))
    if lambda_inv == 0:
        return ce
    log_p = nx.sub_colvec(tape, benign_logits, lse_b)
    log_q = nx.sub_colvec(tape, adv_logits, nx.logsumexp(tape, adv_logits))
    p = nx.exp(tape, log_p)
    kl_rows = nx.row_dot(tape, p, nx.sub(tape, log_p, log_q))
    return nx.add(tape, ce, nx.scale(tape, nx.mean_all(tape, kl_rows), float(lambda_inv)))


def classification_loss(tape, features, anchors, labels, kind: LossKind) -> nx.Tensor:
    """Dispatch the per-feature supervision objective named by `kind`.

    Every branch returns a loss in minimization convention, so the attack
    engine (which maximizes it) always pushes toward misclassification. For
    "cw" that means the negated clamped margin: minimizing grows margins,
    maximizing drives them down to -kappa.
    """
    if kind.kind == "ace":
        return ace_loss(tape, features, anchors, labels, tau=kind.tau)
    if kind.kind == "cos_theta":
        return cos_theta_loss(tape, features, anchors, labels)
    if kind.kind == "theta":
        return theta_loss(tape, features, anchors, labels)
    if kind.kind == "euclid":
        return euclid_loss(tape, features, anchors, labels)
    if kind.kind == "cw":
        return nx.neg(tape, cw_margin(tape, features, anchors, labels,
                                      kappa=kind.kappa))
    raise ValueError(f"{kind.kind!r} is not a per-feature loss")


def combined_loss(tape, encoder, benign_x, adv_x, anchors, labels, alpha: float,
                  kind: LossKind | None = None) -> nx.Tensor:
    """Classification loss on adversarial features plus alpha * smoothness.

    With alpha = 0 the benign forward pass is skipped entirely and the result
    equals the classification loss on adversarial features alone.
    """
    if alpha < 0:
        raise ValueError(f"alpha must be non-negative, got {alpha}")
    kind = kind or LossKind.ace()
    z_adv = encoder.forward(tape, adv_x)
    l1 = classification_loss(tape, z_adv, anchors, labels, kind)
    if alpha == 0:
        return l1
    z_benign = encoder.forward(tape, benign_x)
    l2 = smoothness_loss(tape, z_benign, z_adv)
    return nx.add(tape, l1, nx.scale(tape, l2, float(alpha)))
