"""
The AdamW optimizer and the warmup learning rate schedule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

from ..structures.enums import ScheduleKind
from ..structures.errors import NumericFailure, ValidationError
from .tensor import Tensor

if TYPE_CHECKING:
    from typing import Mapping

    from .tensor import GradientMap


@dataclass
class OptimizerState:
    """Step counter, Adam moments and hyperparameters."""

    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.01
    step: int = 0
    first_moment: dict[str, np.ndarray] = field(default_factory=dict)
    second_moment: dict[str, np.ndarray] = field(default_factory=dict)


@dataclass(frozen=True)
class LrSchedule:
    """Linear warmup followed by a constant or cosine-decayed rate."""

    base_lr: float
    warmup_epochs: int
    total_epochs: int
    steps_per_epoch: int
    kind: ScheduleKind = ScheduleKind.COSINE

    @property
    def warmup_steps(self) -> int:
        """Gets the number of steps spent ramping up."""
        return self.warmup_epochs * self.steps_per_epoch

    @property
    def total_steps(self) -> int:
        """Gets the step at which the schedule ends."""
        return self.total_epochs * self.steps_per_epoch


def lr_at(step: int, schedule: LrSchedule) -> float:
    """Gets the learning rate for a (zero-based) optimizer step.

    The rate ramps linearly from 0 at step 0 to base_lr at the end of
    warmup, then stays constant or follows a half cosine that reaches 0 at
    total_steps.
    """
    if step < 0:
        raise ValidationError("Learning rate step must be non-negative.")
    warmup = schedule.warmup_steps
    if step < warmup:
        return schedule.base_lr * step / warmup
    if schedule.kind == ScheduleKind.CONSTANT:
        return schedule.base_lr
    span = max(schedule.total_steps - warmup, 1)
    progress = min((step - warmup) / span, 1.0)
    return 0.5 * schedule.base_lr * (1.0 + math.cos(math.pi * progress))


def adamw_step(
    params: Mapping[str, Tensor],
    grads: GradientMap,
    state: OptimizerState,
    lr: float | None = None,
) -> tuple[dict[str, Tensor], OptimizerState]:
    """Applies one decoupled-weight-decay Adam update.

    Only the parameters named in grads are updated; all other entries of
    params are returned as the very same objects. Updated tensors are new
    trainable leaves carrying the original names.
    """
    lr = state.lr if lr is None else lr
    unknown = set(grads) - set(params)
    if unknown:
        raise ValidationError(
            f"Gradients for unknown parameters: {sorted(unknown)}."
        )
    state.step += 1
    bias1 = 1.0 - state.beta1**state.step
    bias2 = 1.0 - state.beta2**state.step
    updated = dict(params)
    for name in sorted(grads):
        param = params[name]
        grad = grads[name]
        if grad.shape != param.shape:
            raise ValidationError(
                f"Gradient shape {grad.shape} does not match parameter "
                f"'{name}' of shape {param.shape}."
            )
        m = state.first_moment.get(name, np.zeros(param.shape))
        v = state.second_moment.get(name, np.zeros(param.shape))
        if m.shape != param.shape or v.shape != param.shape:
            raise ValidationError(f"Optimizer moments for '{name}' mismatch.")
        m = state.beta1 * m + (1.0 - state.beta1) * grad
        v = state.beta2 * v + (1.0 - state.beta2) * grad * grad
        m_hat = m / bias1
        v_hat = v / bias2
        denominator = np.sqrt(v_hat) + state.eps
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(m_hat == 0.0, 0.0, m_hat / denominator)
        value = param.data * (1.0 - lr * state.weight_decay) - lr * ratio
        if not np.all(np.isfinite(value)):
            raise NumericFailure(f"Non-finite AdamW update for '{name}'.")
        state.first_moment[name] = m
        state.second_moment[name] = v
        updated[name] = Tensor.parameter(value, name)
    return updated, state
