"""Zero-shot, few-shot, and robustness evaluation, plus anchor diagnostics.

Prediction is always argmax cosine similarity between encoder features and a
set of unit anchors. Few-shot anchors are built from benign support features;
attacks only ever touch query inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .attacks import AttackConfig, run_attack
from .geometry import AnchorSet, GeometryError, compute_cos_stats
from .training import SyntheticDataset, accuracy, align_anchors


@dataclass(frozen=True)
class EvalReport:
    """Clean and per-attack accuracies with the settings that produced them."""

    clean_acc: float
    robust_acc: dict[str, float]
    n_way: int
    k_shot: int
    anchor_mode: str
    flags: dict = field(default_factory=dict)

    def __post_init__(self):
        for name, value in [("clean_acc", self.clean_acc), *self.robust_acc.items()]:
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"accuracy {name}={value} outside [0, 1]")

    def to_dict(self) -> dict:
        return {
            "clean_acc": self.clean_acc,
            "robust_acc": dict(self.robust_acc),
            "n_way": self.n_way,
            "k_shot": self.k_shot,
            "anchor_mode": self.anchor_mode,
            "flags": self.flags,
        }


@dataclass(frozen=True)
class RankMetrics:
    """Semantic-consistency rank metrics averaged over super-categories."""

    sum_of_ranks: float
    top5_ratio: float
    per_supercategory: dict[str, dict]


def zero_shot_predict(encoder, anchors, x: np.ndarray) -> int:
    """Index of the anchor with the highest cosine to the encoded input.

    Ties break toward the lowest label index. x is a single input vector.
    """
    mat = anchors.vectors if isinstance(anchors, AnchorSet) else np.asarray(anchors)
    if encoder.out_dim != mat.shape[1]:
        raise ValueError(
            f"encoder output dim {encoder.out_dim} does not match "
            f"anchor dim {mat.shape[1]}"
        )
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError(f"expected a single input vector, got shape {x.shape}")
    logits = encoder.embed(x[None, :]) @ mat.T
    return int(np.argmax(logits[0]))


def predict_batch(encoder, anchor_rows: np.ndarray, x: np.ndarray) -> np.ndarray:
    logits = encoder.embed(x) @ anchor_rows.T
    return np.argmax(logits, axis=1)


def build_image_anchor(encoder, support_images: np.ndarray) -> np.ndarray:
    """Unit-normalized sum of support features: Norm2{sum_i f(x_i)}."""
    support_images = np.asarray(support_images, dtype=np.float64)
    if support_images.ndim != 2 or support_images.shape[0] < 1:
        raise ValueError(f"need a (K, dim) support stack, got {support_images.shape}")
    total = encoder.embed(support_images).sum(axis=0)
    norm = np.linalg.norm(total)
    if norm < 1e-12:
        raise ValueError("support features sum to zero; image anchor undefined")
    return total / norm


def build_blended_anchor(text_anchor: np.ndarray, encoder,
                         support_images: np.ndarray, beta: float) -> np.ndarray:
    """Norm2{beta * text_anchor + sum_i f(x_i)}: text prior plus support evidence."""
    if beta < 0:
        raise ValueError(f"beta must be non-negative, got {beta}")
    text_anchor = np.asarray(text_anchor, dtype=np.float64)
    support_images = np.asarray(support_images, dtype=np.float64)
    total = beta * text_anchor
    if support_images.size:
        total = total + encoder.embed(support_images).sum(axis=0)
    norm = np.linalg.norm(total)
    if norm < 1e-12:
        raise ValueError("blend sums to zero; anchor undefined")
    return total / norm


def evaluate(encoder, anchors: AnchorSet, dataset: SyntheticDataset,
             attacks: dict[str, AttackConfig] | None = None,
             seed: int = 0) -> EvalReport:
    """Clean accuracy plus robust accuracy per attack on the same test inputs."""
    anchor_rows = align_anchors(anchors, dataset.class_names)
    clean = accuracy(encoder, anchor_rows, dataset.x_test, dataset.y_test)
    robust: dict[str, float] = {}
    flags: dict = {"seed": seed, "attacks": {}}
    for name, cfg in (attacks or {}).items():
        rng = np.random.default_rng(seed)
        x_adv = run_attack(encoder, anchor_rows, dataset.x_test, dataset.y_test,
                           cfg, rng=rng)
        robust[name] = accuracy(encoder, anchor_rows, x_adv, dataset.y_test)
        flags["attacks"][name] = {
            "epsilon": cfg.epsilon,
            "steps": cfg.steps,
            "step_size": cfg.step_size,
            "loss": cfg.loss.kind,
            "random_start": cfg.random_start,
        }
    return EvalReport(
        clean_acc=clean,
        robust_acc=robust,
        n_way=dataset.num_classes,
        k_shot=0,
        anchor_mode="text",
        flags=flags,
    )


@dataclass(frozen=True)
class Task:
    """One episodic n-way task: global class ids plus support/query indices
    into the dataset's test split."""

    classes: np.ndarray
    support_idx: np.ndarray  # (n_way, k_shot)
    query_idx: np.ndarray    # (n_way, q)


def sample_nway_tasks(dataset: SyntheticDataset, n_way: int, k_shot: int,
                      num_tasks: int, seed: int,
                      query_per_class: int = 15) -> list[Task]:
    """Reproducible episodic tasks drawn from the test split."""
    if n_way < 2:
        raise ValueError(f"n_way must be >= 2, got {n_way}")
    if n_way > dataset.num_classes:
        raise ValueError(
            f"n_way {n_way} exceeds the {dataset.num_classes} available classes"
        )
    if k_shot < 0:
        raise ValueError(f"k_shot must be >= 0, got {k_shot}")
    pools = [np.flatnonzero(dataset.y_test == c) for c in range(dataset.num_classes)]
    needed = k_shot + query_per_class
    short = [c for c, pool in enumerate(pools) if pool.size < needed]
    if short:
        raise ValueError(
            f"classes {short} have fewer than {needed} test examples"
        )
    rng = np.random.default_rng(seed)
    tasks = []
    for _ in range(num_tasks):
        classes = rng.choice(dataset.num_classes, size=n_way, replace=False)
        support = np.empty((n_way, k_shot), dtype=np.intp)
        query = np.empty((n_way, query_per_class), dtype=np.intp)
        for slot, c in enumerate(classes):
            picked = rng.choice(pools[c], size=needed, replace=False)
            support[slot] = picked[:k_shot]
            query[slot] = picked[k_shot:]
        tasks.append(Task(classes=classes, support_idx=support, query_idx=query))
    return tasks


def evaluate_tasks(encoder, dataset: SyntheticDataset, tasks: list[Task], *,
                   anchor_mode: str, text_anchor_rows: np.ndarray | None = None,
                   beta: float = 2.0, attack: AttackConfig | None = None,
                   seed: int = 0) -> tuple[float, list[float]]:
    """Mean episodic accuracy under text, image, or blended anchors.

    text_anchor_rows holds one (already remapped) anchor per dataset class,
    indexed by global class id; required for text and blended modes. Support
    features stay benign; the optional attack perturbs queries only.
    """
    if anchor_mode not in ("text", "image", "blended"):
        raise ValueError(f"unknown anchor mode {anchor_mode!r}")
    if anchor_mode in ("text", "blended") and text_anchor_rows is None:
        raise ValueError(f"anchor mode {anchor_mode!r} requires text anchors")
    rng = np.random.default_rng(seed)
    accs = []
    for task in tasks:
        ways = []
        for slot, c in enumerate(task.classes):
            supports = dataset.x_test[task.support_idx[slot]]
            if anchor_mode == "text":
                ways.append(text_anchor_rows[c])
            elif anchor_mode == "image":
                ways.append(build_image_anchor(encoder, supports))
            else:
                ways.append(build_blended_anchor(
                    text_anchor_rows[c], encoder, supports, beta))
        anchor_rows = np.ascontiguousarray(np.stack(ways))
        xq = dataset.x_test[task.query_idx.ravel()]
        yq = np.repeat(np.arange(len(task.classes)), task.query_idx.shape[1])
        if attack is not None and attack.epsilon > 0:
            xq = run_attack(encoder, anchor_rows, xq, yq, attack, rng=rng)
        accs.append(accuracy(encoder, anchor_rows, xq, yq))
    return float(np.mean(accs)), accs


def rank_metrics(anchors: AnchorSet, supercategory_map: dict[str, str]) -> RankMetrics:
    """Per-category cosine ranks aggregated within equal-size super-categories.

    For each category, all categories (itself included) are ranked 0..N-1 by
    descending cosine, ties broken by ascending label index. Per group the
    within-group ranks are summed and the fraction landing in the top
    group-size positions is taken; both are averaged across groups.
    """
    missing = [lab for lab in anchors.labels if lab not in supercategory_map]
    if missing:
        raise ValueError(f"unmapped labels: {missing[:5]}")
    groups: dict[str, list[int]] = {}
    for i, lab in enumerate(anchors.labels):
        groups.setdefault(supercategory_map[lab], []).append(i)
    sizes = {len(v) for v in groups.values()}
    if len(sizes) != 1:
        raise ValueError(f"super-categories must have equal sizes, got {sorted(sizes)}")
    group_size = sizes.pop()
    if group_size < 1 or len(groups) < 1:
        raise ValueError("degenerate super-category map")

    pairwise = compute_cos_stats(anchors).pairwise
    n = anchors.num_anchors
    ranks = np.empty((n, n), dtype=np.intp)
    for i in range(n):
        order = np.argsort(-pairwise[i], kind="stable")
        ranks[i, order] = np.arange(n)
        if ranks[i, i] != 0:
            raise GeometryError(
                f"category {anchors.labels[i]!r} is not its own nearest anchor; "
                "anchor set has duplicate directions"
            )

    top_cut = group_size - 1
    per_group: dict[str, dict] = {}
    for name, members in sorted(groups.items()):
        sub = ranks[np.ix_(members, members)]
        per_group[name] = {
            "sum_of_ranks": int(sub.sum()),
            "top5_ratio": float(np.mean(sub <= top_cut)),
        }
    return RankMetrics(
        sum_of_ranks=float(np.mean([g["sum_of_ranks"] for g in per_group.values()])),
        top5_ratio=float(np.mean([g["top5_ratio"] for g in per_group.values()])),
        per_supercategory=per_group,
    )
