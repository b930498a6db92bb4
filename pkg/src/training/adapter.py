"""
Residual adapters attached to the frozen encoder output.

The adapted feature is normalize(ratio * A(f) + (1 - ratio) * f), where f
is the normalized frozen feature and A is either a square linear map or a
bottleneck MLP (d -> d / r -> d with ReLU after each layer).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

from ..numerics import tensor as ops
from ..numerics.tensor import Tensor
from ..structures.enums import AdapterKind
from ..structures.errors import ValidationError

if TYPE_CHECKING:
    from typing import Mapping

LINEAR_NAMES = ("adapter.weight", "adapter.bias")
MLP_NAMES = ("adapter.fc1.weight", "adapter.fc2.weight")


@dataclass(frozen=True)
class AdapterWeights:
    """The trainable tensors of an adapter and its residual ratio."""

    kind: AdapterKind
    tensors: Mapping[str, Tensor]
    ratio: float = 0.2
    _dim: list[int] = field(
        default_factory=list, init=False, repr=False, compare=False
    )

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", AdapterKind.parse(self.kind))
        object.__setattr__(self, "tensors", dict(self.tensors))
        names = LINEAR_NAMES if self.kind == AdapterKind.LINEAR else MLP_NAMES
        if set(self.tensors) != set(names):
            raise ValidationError(
                f"A {self.kind.label} adapter needs tensors {names}."
            )
        first = self.tensors[names[0]]
        if self.kind == AdapterKind.LINEAR:
            dim = first.shape[0]
            shapes = {names[0]: (dim, dim), names[1]: (dim,)}
        else:
            dim, hidden = first.shape
            shapes = {names[0]: (dim, hidden), names[1]: (hidden, dim)}
        for name, shape in shapes.items():
            if self.tensors[name].shape != shape:
                raise ValidationError(
                    f"Adapter tensor '{name}' has shape "
                    f"{self.tensors[name].shape}, expected {shape}."
                )
        self._dim.append(dim)

    @property
    def dim(self) -> int:
        """Gets the feature width d."""
        return self._dim[0]

    @property
    def hidden_width(self) -> int:
        """Gets the bottleneck width (d for linear adapters)."""
        if self.kind == AdapterKind.LINEAR:
            return self.dim
        return self.tensors["adapter.fc1.weight"].shape[1]

    def parameters(self) -> dict[str, Tensor]:
        """Gets the adapter tensors keyed by parameter name."""
        return dict(self.tensors)

    def arrays(self) -> dict[str, np.ndarray]:
        """Gets detached copies of the adapter values."""
        return {name: np.array(t.data) for name, t in self.tensors.items()}

    def replace(self, parameters: Mapping[str, Tensor]) -> AdapterWeights:
        """Creates a new AdapterWeights from updated tensors."""
        tensors = {name: parameters[name] for name in self.tensors}
        return AdapterWeights(self.kind, tensors, self.ratio)

    def transform(self, features: Tensor) -> Tensor:
        """Applies A to [B, d] features."""
        t = self.tensors
        match self.kind:
            case AdapterKind.LINEAR:
                return features @ t["adapter.weight"] + t["adapter.bias"]
            case AdapterKind.MLP:
                hidden = ops.relu(features @ t["adapter.fc1.weight"])
                return ops.relu(hidden @ t["adapter.fc2.weight"])

    def apply(
        self,
        features: Tensor | np.ndarray,
        normalize: bool = True,
    ) -> Tensor:
        """Mixes the adapted and original features, then normalizes them
        unless normalize is False."""
        if not isinstance(features, Tensor):
            features = Tensor.constant(features)
        if features.shape[-1] != self.dim:
            raise ValidationError(
                f"Adapter width {self.dim} does not match features "
                f"{features.shape}."
            )
        mixed = self.transform(features) * self.ratio + features * (
            1.0 - self.ratio
        )
        return ops.l2_normalize(mixed) if normalize else mixed

    @classmethod
    def from_arrays(
        cls,
        kind: AdapterKind,
        arrays: Mapping[str, np.ndarray],
        ratio: float,
    ) -> AdapterWeights:
        """Creates trainable adapter tensors from arrays."""
        tensors = {
            name: Tensor.parameter(array, name)
            for name, array in arrays.items()
        }
        return cls(kind, tensors, ratio)


def init_adapter(
    kind: AdapterKind,
    dim: int,
    reduction: int = 4,
    ratio: float = 0.2,
    seed: int = 0,
) -> AdapterWeights:
    """Creates an adapter.

    Linear adapters start as the identity map. MLP adapters start with
    random weights scaled by 1 / sqrt(fan_in).
    """
    kind = AdapterKind.parse(kind)
    if kind == AdapterKind.LINEAR:
        arrays = {"adapter.weight": np.eye(dim), "adapter.bias": np.zeros(dim)}
    else:
        if reduction < 1:
            raise ValidationError("Adapter reduction must be positive.")
        hidden = max(1, dim // reduction)
        rng = np.random.default_rng(seed)
        arrays = {
            "adapter.fc1.weight": rng.normal(0.0, dim**-0.5, (dim, hidden)),
            "adapter.fc2.weight": rng.normal(0.0, hidden**-0.5, (hidden, dim)),
        }
    return AdapterWeights.from_arrays(kind, arrays, ratio)
