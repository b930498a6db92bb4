"""
Prompt and adapter training against the contextual mapping objective.
"""

from .adapter import AdapterWeights, init_adapter
from .checkpoint import (
    AdapterCheckpoint,
    PromptCheckpoint,
    load_adapter,
    load_checkpoint,
    save_adapter,
    save_checkpoint,
)
from .losses import mapping_loss
from .trainer import ensemble_targets, fit, train, train_adapter

__all__ = [
    "AdapterCheckpoint",
    "AdapterWeights",
    "PromptCheckpoint",
    "ensemble_targets",
    "fit",
    "init_adapter",
    "load_adapter",
    "load_checkpoint",
    "mapping_loss",
    "save_adapter",
    "save_checkpoint",
    "train",
    "train_adapter",
]
