"""Splitting, objectives, the training loop, and checkpoints."""

from .checkpoint import CHECKPOINT_KIND, load_checkpoint, save_checkpoint
from .loop import (
    EpochStats,
    TrainConfig,
    TrainLog,
    TrainResult,
    effective_hit_fraction,
    predict_dataset,
    train,
)
from .objectives import f1_at_fraction, top_count, wmse, wmse_value, wmse_weights
from .split import SplitSpec, split_dataset, split_indices

__all__ = [
    "CHECKPOINT_KIND",
    "EpochStats",
    "SplitSpec",
    "TrainConfig",
    "TrainLog",
    "TrainResult",
    "effective_hit_fraction",
    "f1_at_fraction",
    "load_checkpoint",
    "predict_dataset",
    "save_checkpoint",
    "split_dataset",
    "split_indices",
    "top_count",
    "train",
    "wmse",
    "wmse_value",
    "wmse_weights",
]
