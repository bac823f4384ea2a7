"""Sharpness-aware minimization with influence attribution."""

from samif._core import (
    Activation,
    Dataset,
    DivergenceError,
    DomainError,
    Error,
    Estimator,
    FormatError,
    GifMode,
    InvalidConfig,
    InvalidInput,
    ModelSpec,
    NeumannConfig,
    RemovalMode,
    SAMConfig,
    Trajectory,
    TrainResult,
    accuracy,
    edit_model,
    hvp,
    influence_scores,
    init_params,
    loo_retrain,
    loss_grad,
    make_blobs,
    p_norm,
    sam_gif,
    sam_hif,
    sam_if_fast,
    spearman,
    train_sam,
    worst_perturbation,
)

__all__ = [name for name in dir() if not name.startswith("_")]
