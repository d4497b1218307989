"""Hierarchical node / edge / graph self-supervised model."""
from .config import GRID_AXES, VARIANTS, ModelConfig, tuning_grid, variant
from .losses import (
    NonFiniteLossError,
    covariance_term,
    mmd_loss,
    node_mse,
    simsiam_loss,
    total_loss,
    variance_term,
    vicreg_terms,
)
from .model import View, augment, backbone, base_view, forward, heads, init_params, standardize_features
from .train import (
    EmbeddingSet,
    TrainingDiverged,
    TrainResult,
    embed,
    load_checkpoint,
    save_checkpoint,
    train,
    write_history,
)
