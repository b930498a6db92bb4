"""
Objectives that pull prompted class-name features toward description
features.
"""

from __future__ import annotations

from typing import TYPE_CHECKING

import numpy as np

from ..encoder.model import TextFeature
from ..numerics import tensor as ops
from ..numerics.tensor import Tensor
from ..structures.enums import LossKind
from ..structures.errors import ValidationError

if TYPE_CHECKING:
    from typing import Union

    FeatureLike = Union[Tensor, TextFeature, np.ndarray]


def _as_rows(features: FeatureLike) -> Tensor:
    """Lifts features into a [B, d] tensor."""
    if isinstance(features, TextFeature):
        features = features.vector
    if not isinstance(features, Tensor):
        features = Tensor.constant(features)
    if features.ndim == 1:
        features = ops.reshape(features, (1, features.shape[0]))
    if features.ndim != 2:
        raise ValidationError(
            f"Features must be [d] or [B, d], got {features.shape}."
        )
    return features


def contrastive_loss(
    predicted: Tensor,
    target: Tensor,
    temperature: float = 0.07,
) -> Tensor:
    """Symmetric InfoNCE with the other rows of the batch as negatives.

    Rows of the same class are still treated as negatives.
    """
    batch = predicted.shape[0]
    logits = (predicted @ ops.transpose(target, (1, 0))) * (1.0 / temperature)
    diagonal = Tensor.constant(np.eye(batch))
    rows = ops.mul(ops.log_softmax(logits, axis=1), diagonal)
    columns = ops.mul(ops.log_softmax(logits, axis=0), diagonal)
    forward = ops.reduce_sum(rows)
    reverse = ops.reduce_sum(columns)
    return (forward + reverse) * (-0.5 / batch)


def mapping_loss(
    predicted: FeatureLike,
    target: FeatureLike,
    kind: LossKind = LossKind.MSE,
    temperature: float = 0.07,
) -> Tensor:
    """Scores how far predicted features are from their targets.

    mse is (1/d) * sum((p - t)^2) per sample and l1 is (1/d) * sum(|p - t|)
    per sample; both are averaged over the batch. contrastive is a
    batch-level symmetric InfoNCE.
    """
    predicted = _as_rows(predicted)
    target = _as_rows(target)
    if predicted.shape != target.shape:
        raise ValidationError(
            f"Feature shapes differ: {predicted.shape} vs {target.shape}."
        )
    match LossKind.parse(kind):
        case LossKind.MSE:
            return ops.reduce_mean(ops.square(predicted - target))
        case LossKind.L1:
            return ops.reduce_mean(ops.absolute(predicted - target))
        case LossKind.CONTRASTIVE:
            return contrastive_loss(predicted, target, temperature)
