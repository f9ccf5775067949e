"""Evaluation and diagnostics for subjective story-pair similarity estimation."""

from __future__ import annotations

__version__ = "0.1.0"

from .agreement import (
    AgreementReport,
    cohen_kappa,
    consensus_vs_reference,
    group_report,
    krippendorff_alpha,
    mean_pairwise,
)
from .core import (
    AnnotationRecord,
    AnnotationSet,
    AspectScores,
    EmbeddingSet,
    EmbeddingVector,
    EvalConfig,
    PairSet,
    PredictionRecord,
    PredictionSet,
    StoryPair,
    bin_label,
    label_histogram,
    round_half_down,
    round_score,
)
from .diagnostics import (
    confusion_matrix,
    empirical_distribution,
    probability_profile,
    severe_error_table,
)
from .errors import (
    DivergenceError,
    EmpathEvalError,
    InsufficientDataError,
    ValidationError,
)
from .losses import LossConfig, PairBatch, loss_angle, loss_contrastive, loss_cosent, loss_cosine_mse
from .metrics import EvalReport, aspect_correlation, classification_report, evaluate, pearson, spearman
from .reports import RunManifest, render_report
from .scoring import cosine_score_pairs, swap_aggregate
from .trainer import ProjectionHead, TrainConfig, TrainHistory, train_projection

__all__ = [name for name in dir() if not name.startswith("_")]
