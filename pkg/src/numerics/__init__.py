"""
Dense float64 tensors, reverse-mode gradients, AdamW and the lr schedule.
"""

from .arrays import (
    cosine_similarity,
    finite_difference_gradient,
    mean_direction,
    normalize_rows,
)
from .optim import LrSchedule, OptimizerState, adamw_step, lr_at
from .tensor import GradientMap, Tensor, backward

__all__ = [
    "GradientMap",
    "LrSchedule",
    "OptimizerState",
    "Tensor",
    "adamw_step",
    "backward",
    "cosine_similarity",
    "finite_difference_gradient",
    "lr_at",
    "mean_direction",
    "normalize_rows",
]
