"""
Zero-shot classification and the accuracy and confidence metrics.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from ..numerics.arrays import normalize_rows
from ..structures.errors import ValidationError

if TYPE_CHECKING:
    from typing import Sequence

    from .features import ImageFeatureSet
    from .head import ClassifierHead


@dataclass(frozen=True)
class Classification:
    """Per-image class probabilities [N, C] and predicted indices [N]."""

    probabilities: np.ndarray
    predictions: np.ndarray


@dataclass(frozen=True)
class Confidence:
    """Mean probability on the true class and per incorrect class."""

    correct: float
    incorrect: float


def classify(images: ImageFeatureSet, head: ClassifierHead) -> Classification:
    """Softmax over temperature-scaled cosine similarities.

    Predictions are the argmax of the similarities, so ties go to the
    lowest class index and the temperature never changes them.
    """
    if images.d != head.d:
        raise ValidationError(
            f"Image features have d={images.d}, the head has d={head.d}."
        )
    if images.n == 0:
        empty = np.zeros((0, len(head.class_names)))
        return Classification(empty, np.zeros(0, dtype=np.int64))
    similarities = normalize_rows(images.features) @ head.class_features.T
    logits = head.temperature * similarities
    logits = logits - logits.max(axis=1, keepdims=True)
    exps = np.exp(logits)
    probabilities = exps / exps.sum(axis=1, keepdims=True)
    predictions = np.argmax(similarities, axis=1)
    return Classification(probabilities, predictions)


def top1_accuracy(
    predictions: Sequence[int] | np.ndarray,
    labels: Sequence[int] | np.ndarray,
) -> float:
    """Gets the fraction of correct predictions."""
    predictions = np.asarray(predictions)
    labels = np.asarray(labels)
    if predictions.size == 0:
        raise ValidationError("Cannot score an empty prediction list.")
    if predictions.shape != labels.shape:
        raise ValidationError("Predictions and labels differ in length.")
    return float(np.mean(predictions == labels))


def harmonic_mean(base: float, novel: float) -> float:
    """Gets 2 * base * novel / (base + novel)."""
    if base <= 0 or novel <= 0:
        raise ValidationError("Harmonic mean needs positive accuracies.")
    return 2.0 * base * novel / (base + novel)


def aggregate(accuracies: Sequence[float]) -> float:
    """Gets the arithmetic mean of several accuracies."""
    if len(accuracies) == 0:
        raise ValidationError("Cannot aggregate zero accuracies.")
    return float(np.mean(np.asarray(accuracies, dtype=np.float64)))


def confidence_report(
    probabilities: np.ndarray,
    labels: Sequence[int] | np.ndarray,
) -> Confidence:
    """Averages the true-class probability and the per-incorrect-class mass.

    The incorrect confidence of one sample is (1 - p_true) / (C - 1).
    """
    probabilities = np.asarray(probabilities, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    count, classes = probabilities.shape
    if count == 0 or classes < 2:
        raise ValidationError("Confidence needs samples and >= 2 classes.")
    true = probabilities[np.arange(count), labels]
    incorrect = (probabilities.sum(axis=1) - true) / (classes - 1)
    return Confidence(float(true.mean()), float(incorrect.mean()))
