"""White-box input-space attacks under an l-infinity ball.

All attacks maximize a scalar loss by iterated signed-gradient steps. The
perturbation delta is tracked explicitly and clipped to [-eps, eps]; the
iterate fed to the network is always clip(x0 + delta, 0, 1), so every step
satisfies both the ball and the valid input range.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import numerics as nx
from .objectives import LossKind, anchor_matrix, classification_loss

_BALL_SLACK = 1e-12


@dataclass(frozen=True)
class AttackConfig:
    """l-infinity attack recipe: radius, iterations, step size, loss."""

    epsilon: float
    steps: int = 1
    step_size: float = 0.0
    loss: LossKind = field(default_factory=LossKind.ace)
    random_start: bool = False

    def __post_init__(self):
        if self.epsilon < 0:
            raise ValueError(f"epsilon must be non-negative, got {self.epsilon}")
        if self.steps < 1:
            raise ValueError(f"steps must be >= 1, got {self.steps}")
        if not 0 <= self.step_size <= 2 * self.epsilon:
            raise ValueError(
                f"step_size must lie in [0, 2*epsilon], got {self.step_size} "
                f"for epsilon {self.epsilon}"
            )


def attack_presets() -> dict[str, AttackConfig]:
    """Named recipes: training PGD, evaluation PGD-20, heavy 2-step PGD,
    30-step CW-loss PGD, and single-step FGSM (PGD-1 with s = eps)."""
    eps = 8.0 / 255.0
    return {
        "fgsm": AttackConfig(epsilon=eps, steps=1, step_size=eps),
        "pgd-train": AttackConfig(epsilon=eps, steps=7, step_size=2.0 / 255.0,
                                  random_start=True),
        "pgd20": AttackConfig(epsilon=eps, steps=20, step_size=2.0 / 255.0),
        "pgd2": AttackConfig(epsilon=eps, steps=2, step_size=8.0 / 255.0),
        "cw30": AttackConfig(epsilon=eps, steps=30, step_size=0.8 / 255.0,
                             loss=LossKind.cw()),
    }


def attack_preset(name: str, **overrides) -> AttackConfig:
    presets = attack_presets()
    if name not in presets:
        raise ValueError(f"unknown attack preset {name!r}; choices: {sorted(presets)}")
    cfg = presets[name]
    return replace(cfg, **overrides) if overrides else cfg


def maximize_loss(loss_fn, x0: np.ndarray, *, epsilon: float, steps: int,
                  step_size: float, random_start: bool = False,
                  rng: np.random.Generator | None = None) -> np.ndarray:
    """Iterated signed-gradient ascent of loss_fn(tape, x) inside the ball.

    loss_fn must return a scalar tape node. sign(0) is 0, so zero-gradient
    inputs stay put. Returns clip(x0 + delta, 0, 1) with |delta| <= epsilon.
    """
    x0 = np.ascontiguousarray(np.asarray(x0, dtype=np.float64))
    if epsilon == 0.0:
        return x0.copy()
    if random_start:
        if rng is None:
            raise ValueError("random_start requires an rng")
        delta = rng.uniform(-epsilon, epsilon, size=x0.shape)
    else:
        delta = np.zeros_like(x0)
    for _ in range(steps):
        x = np.clip(x0 + delta, 0.0, 1.0)
        g = nx.grad_wrt_input(loss_fn, x)
        delta = np.clip(delta + step_size * np.sign(g), -epsilon, epsilon)
        x = np.clip(x0 + delta, 0.0, 1.0)
        assert np.all(np.abs(x - x0) <= epsilon + _BALL_SLACK)
        assert np.all((x >= 0.0) & (x <= 1.0))
    return np.clip(x0 + delta, 0.0, 1.0)


def _make_loss_fn(encoder, anchors, labels, kind: LossKind):
    mat = anchor_matrix(anchors)
    labels = np.asarray(labels, dtype=np.intp)

    def loss_fn(tape, xt):
        z = encoder.forward(tape, xt)
        return classification_loss(tape, z, mat, labels, kind)

    return loss_fn


def fgsm(encoder, anchors, x, y, epsilon: float,
         loss: LossKind | None = None) -> np.ndarray:
    """Single signed-gradient step of size epsilon, clipped to [0, 1]."""
    x = np.ascontiguousarray(np.asarray(x, dtype=np.float64))
    if epsilon == 0.0:
        return x.copy()
    loss_fn = _make_loss_fn(encoder, anchors, y, loss or LossKind.ace())
    g = nx.grad_wrt_input(loss_fn, x)
    return np.clip(x + epsilon * np.sign(g), 0.0, 1.0)


def pgd(encoder, anchors, x, y, config: AttackConfig,
        rng: np.random.Generator | None = None) -> np.ndarray:
    """Projected signed-gradient ascent per the config against the encoder."""
    loss_fn = _make_loss_fn(encoder, anchors, y, config.loss)
    return maximize_loss(
        loss_fn, x,
        epsilon=config.epsilon, steps=config.steps, step_size=config.step_size,
        random_start=config.random_start, rng=rng,
    )


def run_attack(encoder, anchors, x, y, config: AttackConfig,
               rng: np.random.Generator | None = None,
               batch_size: int = 256) -> np.ndarray:
    """Attack a whole array in batches; returns the adversarial inputs."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.intp)
    out = np.empty_like(x)
    for start in range(0, x.shape[0], batch_size):
        sl = slice(start, start + batch_size)
        out[sl] = pgd(encoder, anchors, x[sl], y[sl], config, rng=rng)
    return out
