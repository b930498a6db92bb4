"""
Plain numpy helpers shared by the encoder, trainer and evaluation.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from ..structures.errors import DegenerateEnsembleError, NumericFailure

NORM_FLOOR = 1e-12


def normalize_rows(rows: np.ndarray) -> np.ndarray:
    """Scales every row (last axis) to unit Euclidean norm."""
    rows = np.asarray(rows, dtype=np.float64)
    norms = np.linalg.norm(rows, axis=-1, keepdims=True)
    if np.any(norms < NORM_FLOOR):
        raise NumericFailure("Cannot normalize a zero row.")
    return rows / norms


def mean_direction(rows: np.ndarray) -> np.ndarray:
    """Normalizes each row, averages them and re-normalizes the mean.

    This is the ensembling order used for both ensembled training targets
    and ensembled classifier heads.
    """
    rows = np.atleast_2d(np.asarray(rows, dtype=np.float64))
    if rows.shape[0] == 0:
        raise DegenerateEnsembleError("Cannot ensemble zero features.")
    mean = normalize_rows(rows).mean(axis=0)
    norm = np.linalg.norm(mean)
    if norm < 1e-9:
        raise DegenerateEnsembleError(
            "Ensembled features cancel out to a zero vector."
        )
    return mean / norm


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Cosine similarity between matching rows of a and b."""
    a = normalize_rows(a)
    b = normalize_rows(b)
    return (a * b).sum(axis=-1)


def finite_difference_gradient(
    function: Callable[[np.ndarray], float],
    point: np.ndarray,
    eps: float = 1e-5,
) -> np.ndarray:
    """Central finite-difference gradient of a scalar function."""
    point = np.array(point, dtype=np.float64)
    grad = np.zeros_like(point)
    flat = point.reshape(-1)
    grad_flat = grad.reshape(-1)
    for index in range(flat.size):
        original = flat[index]
        flat[index] = original + eps
        upper = function(point.copy())
        flat[index] = original - eps
        lower = function(point.copy())
        flat[index] = original
        grad_flat[index] = (upper - lower) / (2.0 * eps)
    return grad
