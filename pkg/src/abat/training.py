"""Adversarial training loop: SGD with momentum, weight decay, step decay.

Anchors are frozen throughout; only the encoder trains. Each step generates
perturbations by maximizing the classification loss, then minimizes that loss
on the perturbed inputs plus alpha times the smoothness term between benign
and perturbed features.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import numerics as nx
from .attacks import AttackConfig, attack_preset, pgd, run_attack
from .geometry import AnchorSet
from .objectives import (
    LossKind,
    classification_loss,
    cosine_logits,
    smoothness_loss,
    trades_kl_loss,
)


@dataclass(frozen=True)
class TrainConfig:
    """Optimizer schedule, adversarial recipe, and loss selection."""

    epochs: int
    lr: float = 0.1
    momentum: float = 0.9
    weight_decay: float = 5e-4
    lr_decay_epochs: tuple[int, ...] = (100, 150)
    lr_decay_factor: float = 0.1
    alpha: float = 3.0
    attack: AttackConfig = field(default_factory=lambda: attack_preset("pgd-train"))
    loss: LossKind = field(default_factory=LossKind.ace)
    seed: int = 0
    batch_size: int = 128
    curve_attack: AttackConfig | None = None

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.lr <= 0:
            raise ValueError(f"lr must be positive, got {self.lr}")
        if not 0 <= self.momentum < 1:
            raise ValueError(f"momentum must lie in [0, 1), got {self.momentum}")
        if self.alpha < 0:
            raise ValueError(f"alpha must be non-negative, got {self.alpha}")
        if self.weight_decay < 0:
            raise ValueError(f"weight_decay must be non-negative, got {self.weight_decay}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")


@dataclass(frozen=True)
class CurvePoint:
    epoch: int
    train_loss: float
    clean_acc: float
    robust_acc: float


class LearningCurve:
    """Per-epoch training records with strictly increasing epoch numbers."""

    def __init__(self, points: list[CurvePoint] | None = None):
        self.points: list[CurvePoint] = []
        for p in points or []:
            self.append(p)

    def append(self, point: CurvePoint):
        if self.points and point.epoch <= self.points[-1].epoch:
            raise ValueError(
                f"epochs must increase: {point.epoch} after {self.points[-1].epoch}"
            )
        self.points.append(point)

    def final(self) -> CurvePoint:
        if not self.points:
            raise ValueError("empty learning curve")
        return self.points[-1]

    def __len__(self):
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    def __eq__(self, other):
        return isinstance(other, LearningCurve) and self.points == other.points


@dataclass(frozen=True)
class SyntheticDataset:
    """Gaussian class blobs in [0, 1]^dim with a train/test split."""

    x_train: np.ndarray
    y_train: np.ndarray
    x_test: np.ndarray
    y_test: np.ndarray
    class_names: list[str]

    @property
    def num_classes(self) -> int:
        return len(self.class_names)

    @property
    def dim(self) -> int:
        return self.x_train.shape[1]


def make_synthetic_dataset(num_classes: int, dim: int, samples_per_class: int,
                           spread: float, seed: int,
                           train_fraction: float = 0.8,
                           class_names: list[str] | None = None) -> SyntheticDataset:
    """Clipped Gaussian blobs around per-class centers drawn in [0.25, 0.75]^dim."""
    if num_classes < 2:
        raise ValueError(f"need at least two classes, got {num_classes}")
    if spread <= 0:
        raise ValueError(f"spread must be positive, got {spread}")
    if samples_per_class < 2:
        raise ValueError(f"need at least two samples per class, got {samples_per_class}")
    if not 0 < train_fraction < 1:
        raise ValueError(f"train_fraction must lie in (0, 1), got {train_fraction}")
    rng = np.random.default_rng(seed)
    centers = rng.uniform(0.25, 0.75, size=(num_classes, dim))
    n_train = max(1, int(round(train_fraction * samples_per_class)))
    n_train = min(n_train, samples_per_class - 1)
    xs_train, ys_train, xs_test, ys_test = [], [], [], []
    for c in range(num_classes):
        pts = np.clip(
            centers[c] + spread * rng.standard_normal((samples_per_class, dim)),
            0.0, 1.0,
        )
        xs_train.append(pts[:n_train])
        ys_train.append(np.full(n_train, c, dtype=np.intp))
        xs_test.append(pts[n_train:])
        ys_test.append(np.full(samples_per_class - n_train, c, dtype=np.intp))
    if class_names is None:
        width = max(3, len(str(num_classes - 1)))
        class_names = [f"class_{i:0{width}d}" for i in range(num_classes)]
    elif len(class_names) != num_classes:
        raise ValueError(f"{len(class_names)} names for {num_classes} classes")
    return SyntheticDataset(
        x_train=np.concatenate(xs_train),
        y_train=np.concatenate(ys_train),
        x_test=np.concatenate(xs_test),
        y_test=np.concatenate(ys_test),
        class_names=list(class_names),
    )


def align_anchors(anchors: AnchorSet, class_names: list[str]) -> np.ndarray:
    """Anchor rows reordered to a dataset's class indexing.

    Every dataset class must have an anchor of the same label.
    """
    return np.ascontiguousarray(
        anchors.vectors[[anchors.index_of(name) for name in class_names]]
    )


def lr_at_epoch(config: TrainConfig, epoch: int) -> float:
    decays = sum(1 for d in config.lr_decay_epochs if epoch > d)
    return config.lr * config.lr_decay_factor**decays


def accuracy(encoder, anchor_rows: np.ndarray, x: np.ndarray, y: np.ndarray) -> float:
    """Fraction of argmax-cosine predictions matching y."""
    logits = encoder.embed(x) @ anchor_rows.T
    return float(np.mean(np.argmax(logits, axis=1) == np.asarray(y)))


def sgd_step(params, momentum_bufs, lr: float, momentum: float,
             weight_decay: float) -> None:
    """One SGD update with momentum; weight decay enters as an L2 penalty
    added to the gradient before the momentum buffer."""
    for p, buf in zip(params, momentum_bufs):
        g = p.grad if p.grad is not None else np.zeros_like(p.data)
        g = g + weight_decay * p.data
        buf *= momentum
        buf += g
        p.data = p.data - lr * buf


def _batch_loss(encoder, tape, x_benign, x_adv, anchor_rows, y, config: TrainConfig):
    if config.loss.kind == "trades_kl":
        z_benign = encoder.forward(tape, nx.Tensor(x_benign))
        z_adv = encoder.forward(tape, nx.Tensor(x_adv))
        return trades_kl_loss(
            tape,
            cosine_logits(tape, z_benign, anchor_rows),
            cosine_logits(tape, z_adv, anchor_rows),
            y,
            config.loss.lambda_inv,
        )
    z_adv = encoder.forward(tape, nx.Tensor(x_adv))
    loss = classification_loss(tape, z_adv, anchor_rows, y, config.loss)
    if config.alpha > 0:
        z_benign = encoder.forward(tape, nx.Tensor(x_benign))
        loss = nx.add(
            tape, loss,
            nx.scale(tape, smoothness_loss(tape, z_benign, z_adv), config.alpha),
        )
    return loss


def train(encoder, dataset: SyntheticDataset, anchors: AnchorSet,
          config: TrainConfig):
    """Adversarially train the encoder in place; returns (encoder, curve).

    Deterministic for a fixed config and seed: one generator drives batch
    shuffling and attack random starts in a fixed order.
    """
    anchor_rows = align_anchors(anchors, dataset.class_names)
    if anchor_rows.shape[1] != encoder.out_dim:
        raise ValueError(
            f"anchor dimension {anchor_rows.shape[1]} does not match "
            f"encoder output {encoder.out_dim}"
        )
    rng = np.random.default_rng(config.seed)
    params = encoder.parameters()
    momentum_bufs = [np.zeros_like(p.data) for p in params]
    curve = LearningCurve()
    curve_attack = config.curve_attack or config.attack
    x_all, y_all = dataset.x_train, dataset.y_train

    for epoch in range(1, config.epochs + 1):
        lr = lr_at_epoch(config, epoch)
        order = rng.permutation(x_all.shape[0])
        batch_losses = []
        for start in range(0, order.size, config.batch_size):
            idx = order[start : start + config.batch_size]
            x0 = np.ascontiguousarray(x_all[idx])
            y = y_all[idx]
            if config.attack.epsilon > 0:
                x_adv = pgd(encoder, anchor_rows, x0, y, config.attack, rng=rng)
            else:
                x_adv = x0
            encoder.zero_grad()
            tape = nx.Tape()
            loss = _batch_loss(encoder, tape, x0, x_adv, anchor_rows, y, config)
            value = float(loss.data)
            if not np.isfinite(value):
                raise RuntimeError(
                    f"non-finite training loss at epoch {epoch}, "
                    f"batch {start // config.batch_size}, lr {lr}"
                )
            tape.backward(loss)
            sgd_step(params, momentum_bufs, lr, config.momentum, config.weight_decay)
            batch_losses.append(value)
        clean_acc = accuracy(encoder, anchor_rows, dataset.x_test, dataset.y_test)
        if curve_attack.epsilon > 0:
            x_adv_test = run_attack(
                encoder, anchor_rows, dataset.x_test, dataset.y_test,
                curve_attack, rng=rng,
            )
            robust_acc = accuracy(encoder, anchor_rows, x_adv_test, dataset.y_test)
        else:
            robust_acc = clean_acc
        curve.append(CurvePoint(
            epoch=epoch,
            train_loss=float(np.mean(batch_losses)),
            clean_acc=clean_acc,
            robust_acc=robust_acc,
        ))
    return encoder, curve
