"""Anchor-based adversarial training on the unit hypersphere.

Pipeline: remap clustered anchors so they spread over a hemisphere, train a
small encoder against them with alignment cross-entropy plus a smoothness
term, and evaluate zero/few-shot robust classification.
"""

from .attacks import AttackConfig, attack_preset, attack_presets, fgsm, maximize_loss, pgd
from .evaluation import (
    EvalReport,
    RankMetrics,
    build_blended_anchor,
    build_image_anchor,
    evaluate,
    evaluate_tasks,
    rank_metrics,
    sample_nway_tasks,
    zero_shot_predict,
)
from .geometry import (
    AnchorSet,
    CosStats,
    ExpansionModel,
    GeometryError,
    compute_cos_stats,
    expand,
    expand_novel,
    fit_expansion,
    generate_mmc_anchors,
    make_rotation,
    sample_clustered_anchors,
)
from .numerics import FeatureEncoder, Tape, Tensor, grad_wrt_input
from .objectives import (
    LossKind,
    ace_loss,
    combined_loss,
    cos_theta_loss,
    cw_margin,
    euclid_loss,
    smoothness_loss,
    theta_loss,
    trades_kl_loss,
)
from .training import (
    LearningCurve,
    SyntheticDataset,
    TrainConfig,
    make_synthetic_dataset,
    train,
)

__version__ = "0.1.0"
