"""
Immutable float64 tensors with tape-based reverse-mode differentiation.

Every op output remembers its parents and a closure mapping the output
gradient onto parent gradients, but only when some parent requires a
gradient; computations over frozen tensors record nothing. Nodes are
numbered as they are created, so walking the reachable nodes in
descending creation order replays the tape backwards and accumulates
gradients in a fixed order.
"""

from __future__ import annotations

import itertools
import math
from typing import TYPE_CHECKING, Callable

import numpy as np

from ..structures.errors import NumericFailure, ValidationError

if TYPE_CHECKING:
    from typing import Iterable, Sequence

GradientMap = dict[str, np.ndarray]
Backward = Callable[[np.ndarray], tuple["np.ndarray | None", ...]]

_node_ids = itertools.count()
_NORM_FLOOR = 1e-12
_GELU_C = math.sqrt(2.0 / math.pi)
_GELU_K = 0.044715
_QUICK_GELU_K = 1.702


class Tensor:
    """A read-only float64 array that may take part in differentiation."""

    __slots__ = (
        "data",
        "requires_grad",
        "name",
        "op",
        "_parents",
        "_backward",
        "_id",
    )

    def __init__(
        self,
        data: Sequence | np.ndarray | float,
        requires_grad: bool = False,
        name: str | None = None,
    ) -> None:
        """Creates a leaf tensor holding a private copy of the data."""
        array = np.array(data, dtype=np.float64)
        self._setup(array, requires_grad, name, "leaf", (), None)

    def _setup(
        self,
        array: np.ndarray,
        requires_grad: bool,
        name: str | None,
        op: str,
        parents: tuple[Tensor, ...],
        backward: Backward | None,
    ) -> None:
        """Stores the fields, checking finiteness and freezing the array."""
        if not np.all(np.isfinite(array)):
            raise NumericFailure(
                f"Non-finite value produced by '{op}' "
                f"(shape {array.shape})."
            )
        array.flags.writeable = False
        self.data = array
        self.requires_grad = requires_grad
        self.name = name
        self.op = op
        self._parents = parents
        self._backward = backward
        self._id = next(_node_ids)

    @classmethod
    def parameter(cls, data: Sequence | np.ndarray, name: str) -> Tensor:
        """Creates a named trainable leaf."""
        return cls(data, requires_grad=True, name=name)

    @classmethod
    def constant(cls, data: Sequence | np.ndarray | float) -> Tensor:
        """Creates a frozen leaf."""
        return cls(data)

    @classmethod
    def _result(
        cls,
        array: np.ndarray,
        op: str,
        parents: tuple[Tensor, ...],
        backward: Backward,
    ) -> Tensor:
        """Wraps an op output, recording it only if a parent needs it."""
        out = cls.__new__(cls)
        needs = any(parent.requires_grad for parent in parents)
        out._setup(
            np.asarray(array, dtype=np.float64),
            needs,
            None,
            op,
            parents if needs else (),
            backward if needs else None,
        )
        return out

    @property
    def shape(self) -> tuple[int, ...]:
        """Gets the shape of the tensor."""
        return self.data.shape

    @property
    def ndim(self) -> int:
        """Gets the number of axes."""
        return self.data.ndim

    @property
    def size(self) -> int:
        """Gets the number of entries."""
        return self.data.size

    @property
    def is_leaf(self) -> bool:
        """Whether the tensor was created directly rather than by an op."""
        return self.op == "leaf"

    def item(self) -> float:
        """Gets the value of a single-entry tensor."""
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        """Gets the read-only underlying array."""
        return self.data

    def detach(self) -> Tensor:
        """Gets a frozen leaf with the same values."""
        return Tensor(self.data)

    def __repr__(self) -> str:
        label = f" name={self.name!r}" if self.name else ""
        return (
            f"Tensor(shape={self.shape}, op={self.op!r}, "
            f"requires_grad={self.requires_grad}{label})"
        )

    def __add__(self, other: Tensor | float) -> Tensor:
        return add(self, _lift(other))

    def __radd__(self, other: float) -> Tensor:
        return add(_lift(other), self)

    def __sub__(self, other: Tensor | float) -> Tensor:
        return sub(self, _lift(other))

    def __rsub__(self, other: float) -> Tensor:
        return sub(_lift(other), self)

    def __mul__(self, other: Tensor | float) -> Tensor:
        if isinstance(other, (int, float)):
            return scale(self, float(other))
        return mul(self, other)

    def __rmul__(self, other: float) -> Tensor:
        return scale(self, float(other))

    def __truediv__(self, other: float) -> Tensor:
        return scale(self, 1.0 / float(other))

    def __neg__(self) -> Tensor:
        return scale(self, -1.0)

    def __matmul__(self, other: Tensor) -> Tensor:
        return matmul(self, other)


def _lift(value: Tensor | float | np.ndarray) -> Tensor:
    """Wraps plain numbers and arrays as frozen tensors."""
    return value if isinstance(value, Tensor) else Tensor(value)


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sums a gradient over the axes that broadcasting expanded."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise a + b with broadcasting."""

    def backward(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return Tensor._result(a.data + b.data, "add", (a, b), backward)


def sub(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise a - b with broadcasting."""

    def backward(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return Tensor._result(a.data - b.data, "sub", (a, b), backward)


def mul(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise a * b with broadcasting."""

    def backward(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return (
            _unbroadcast(g * b.data, a.shape),
            _unbroadcast(g * a.data, b.shape),
        )

    return Tensor._result(a.data * b.data, "mul", (a, b), backward)


def scale(a: Tensor, factor: float) -> Tensor:
    """Multiplies every entry by a constant."""

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        return (g * factor,)

    return Tensor._result(a.data * factor, "scale", (a,), backward)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Batched matrix product over the last two axes.

    Leading axes broadcast, so a [B, L, D] activation times a [D, E]
    weight works without tiling the weight.
    """
    if a.ndim < 2 or b.ndim < 2:
        raise ValidationError("matmul expects operands with >= 2 axes.")
    if a.shape[-1] != b.shape[-2]:
        raise ValidationError(
            f"matmul shape mismatch: {a.shape} @ {b.shape}."
        )

    def backward(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        grad_a = np.matmul(g, np.swapaxes(b.data, -1, -2))
        grad_b = np.matmul(np.swapaxes(a.data, -1, -2), g)
        return _unbroadcast(grad_a, a.shape), _unbroadcast(grad_b, b.shape)

    array = np.matmul(a.data, b.data)
    return Tensor._result(array, "matmul", (a, b), backward)


def transpose(a: Tensor, axes: Sequence[int]) -> Tensor:
    """Permutes the axes of a tensor."""
    axes = tuple(axes)
    inverse = tuple(int(axis) for axis in np.argsort(axes))

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        return (np.transpose(g, inverse),)

    return Tensor._result(
        np.transpose(a.data, axes), "transpose", (a,), backward
    )


def reshape(a: Tensor, shape: Sequence[int]) -> Tensor:
    """Reshapes a tensor without changing its entries."""

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        return (g.reshape(a.shape),)

    return Tensor._result(
        a.data.reshape(tuple(shape)), "reshape", (a,), backward
    )


def broadcast_to(a: Tensor, shape: Sequence[int]) -> Tensor:
    """Repeats a tensor along broadcast axes."""

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        return (_unbroadcast(g, a.shape),)

    array = np.broadcast_to(a.data, tuple(shape)).copy()
    return Tensor._result(array, "broadcast", (a,), backward)


def concat(tensors: Sequence[Tensor], axis: int) -> Tensor:
    """Joins tensors along an existing axis."""
    tensors = tuple(tensors)
    sizes = [tensor.shape[axis] for tensor in tensors]
    bounds = np.cumsum(sizes)[:-1]

    def backward(g: np.ndarray) -> tuple[np.ndarray, ...]:
        return tuple(np.split(g, bounds, axis=axis))

    array = np.concatenate([tensor.data for tensor in tensors], axis=axis)
    return Tensor._result(array, "concat", tensors, backward)


def slice_axis(a: Tensor, axis: int, start: int, stop: int) -> Tensor:
    """Takes the half-open range [start, stop) along one axis."""
    index = [slice(None)] * a.ndim
    index[axis] = slice(start, stop)
    index = tuple(index)

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        grad = np.zeros(a.shape)
        grad[index] = g
        return (grad,)

    return Tensor._result(a.data[index], "slice", (a,), backward)


def gather_positions(a: Tensor, positions: Sequence[int]) -> Tensor:
    """Picks row positions[b] of each batch entry of a [B, L, D] tensor."""
    rows = np.arange(a.shape[0])
    positions = np.asarray(positions, dtype=np.int64)

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        grad = np.zeros(a.shape)
        grad[rows, positions] = g
        return (grad,)

    return Tensor._result(a.data[rows, positions], "gather", (a,), backward)


def layer_norm(
    x: Tensor,
    weight: Tensor,
    bias: Tensor,
    eps: float = 1e-5,
) -> Tensor:
    """Normalizes the last axis to zero mean and unit variance."""
    mean = x.data.mean(axis=-1, keepdims=True)
    centered = x.data - mean
    inv_std = 1.0 / np.sqrt((centered**2).mean(axis=-1, keepdims=True) + eps)
    normed = centered * inv_std

    def backward(g: np.ndarray) -> tuple[np.ndarray, ...]:
        grad_normed = g * weight.data
        grad_x = inv_std * (
            grad_normed
            - grad_normed.mean(axis=-1, keepdims=True)
            - normed * (grad_normed * normed).mean(axis=-1, keepdims=True)
        )
        return (
            grad_x,
            _unbroadcast(g * normed, weight.shape),
            _unbroadcast(g, bias.shape),
        )

    array = normed * weight.data + bias.data
    return Tensor._result(array, "layer_norm", (x, weight, bias), backward)


def softmax(
    x: Tensor,
    axis: int = -1,
    mask: np.ndarray | None = None,
) -> Tensor:
    """Softmax along an axis; entries where mask is False are exactly 0."""
    if mask is None:
        shifted = x.data - x.data.max(axis=axis, keepdims=True)
        exps = np.exp(shifted)
    else:
        mask = np.broadcast_to(mask, x.shape)
        peak = np.where(mask, x.data, -np.inf).max(axis=axis, keepdims=True)
        shifted = np.where(mask, x.data - peak, 0.0)
        exps = np.where(mask, np.exp(shifted), 0.0)
    probs = exps / exps.sum(axis=axis, keepdims=True)

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        inner = (g * probs).sum(axis=axis, keepdims=True)
        return (probs * (g - inner),)

    return Tensor._result(probs, "softmax", (x,), backward)


def log_softmax(x: Tensor, axis: int = -1) -> Tensor:
    """Numerically stable log of the softmax along an axis."""
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    out = shifted - log_norm
    probs = np.exp(out)

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        return (g - probs * g.sum(axis=axis, keepdims=True),)

    return Tensor._result(out, "log_softmax", (x,), backward)


def gelu(x: Tensor) -> Tensor:
    """GELU with the tanh approximation."""
    cube = x.data**3
    inner = np.tanh(_GELU_C * (x.data + _GELU_K * cube))

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        d_inner = _GELU_C * (1.0 + 3.0 * _GELU_K * x.data**2)
        slope = 0.5 * x.data * (1.0 - inner**2) * d_inner
        local = 0.5 * (1.0 + inner) + slope
        return (g * local,)

    array = 0.5 * x.data * (1.0 + inner)
    return Tensor._result(array, "gelu", (x,), backward)


def quick_gelu(x: Tensor) -> Tensor:
    """The x * sigmoid(1.702 x) activation of CLIP's text tower."""
    gate = np.exp(-np.logaddexp(0.0, -_QUICK_GELU_K * x.data))

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        local = gate + x.data * _QUICK_GELU_K * gate * (1.0 - gate)
        return (g * local,)

    return Tensor._result(x.data * gate, "quick_gelu", (x,), backward)


def relu(x: Tensor) -> Tensor:
    """max(x, 0)."""
    positive = x.data > 0

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        return (g * positive,)

    array = np.where(positive, x.data, 0.0)
    return Tensor._result(array, "relu", (x,), backward)


def absolute(x: Tensor) -> Tensor:
    """|x|, with a zero subgradient at 0."""

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        return (g * np.sign(x.data),)

    return Tensor._result(np.abs(x.data), "abs", (x,), backward)


def square(x: Tensor) -> Tensor:
    """x squared."""

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        return (2.0 * g * x.data,)

    return Tensor._result(x.data**2, "square", (x,), backward)


def _expand_reduced(
    g: np.ndarray,
    shape: tuple[int, ...],
    axis: int | tuple[int, ...] | None,
    keepdims: bool,
) -> np.ndarray:
    """Broadcasts the gradient of a reduction back to the input shape."""
    if axis is not None and not keepdims:
        axes = (axis,) if isinstance(axis, int) else axis
        axes = sorted(a % len(shape) for a in axes)
        for a in axes:
            g = np.expand_dims(g, a)
    return np.broadcast_to(g, shape).copy()


def reduce_sum(
    x: Tensor,
    axis: int | tuple[int, ...] | None = None,
    keepdims: bool = False,
) -> Tensor:
    """Sums entries over the given axes (all by default)."""

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        return (_expand_reduced(g, x.shape, axis, keepdims),)

    array = x.data.sum(axis=axis, keepdims=keepdims)
    return Tensor._result(array, "sum", (x,), backward)


def reduce_mean(
    x: Tensor,
    axis: int | tuple[int, ...] | None = None,
    keepdims: bool = False,
) -> Tensor:
    """Averages entries over the given axes (all by default)."""
    array = x.data.mean(axis=axis, keepdims=keepdims)
    count = x.size // max(np.size(array), 1)

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        return (_expand_reduced(g, x.shape, axis, keepdims) / count,)

    return Tensor._result(array, "mean", (x,), backward)


def l2_normalize(x: Tensor, axis: int = -1) -> Tensor:
    """Scales vectors along an axis to unit Euclidean norm."""
    norms = np.sqrt((x.data**2).sum(axis=axis, keepdims=True))
    if np.any(norms < _NORM_FLOOR):
        raise NumericFailure("Cannot normalize a zero vector.")
    unit = x.data / norms

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        inner = (g * unit).sum(axis=axis, keepdims=True)
        return ((g - unit * inner) / norms,)

    return Tensor._result(unit, "l2_normalize", (x,), backward)


def _reachable(loss: Tensor) -> list[Tensor]:
    """Collects every recorded node reachable from the loss."""
    seen: dict[int, Tensor] = {}
    stack = [loss]
    while stack:
        node = stack.pop()
        if node._id in seen or not node.requires_grad:
            continue
        seen[node._id] = node
        stack.extend(node._parents)
    return sorted(seen.values(), key=lambda node: node._id, reverse=True)


def backward(loss: Tensor, trainables: Iterable[Tensor]) -> GradientMap:
    """Computes exact gradients of a scalar loss w.r.t. named parameters.

    Frozen tensors receive nothing. A trainable that the loss does not
    depend on gets a zero gradient. Gradients accumulate in reverse
    creation order of the recorded nodes, which fixes the summation order.
    """
    trainables = list(trainables)
    if not trainables:
        raise ValidationError("backward needs at least one trainable.")
    if loss.size != 1 or loss.ndim > 1:
        raise ValidationError(f"Loss must be a scalar, got {loss.shape}.")
    for parameter in trainables:
        if not parameter.requires_grad or parameter.name is None:
            raise ValidationError(
                "Only named tensors created with Tensor.parameter can be "
                "differentiated."
            )

    pending: dict[int, np.ndarray] = {loss._id: np.ones(loss.shape)}
    leaf_grads: dict[int, np.ndarray] = {}
    for node in _reachable(loss):
        grad = pending.pop(node._id, None)
        if grad is None:
            continue
        if node._backward is None:
            leaf_grads[node._id] = grad
            continue
        for parent, parent_grad in zip(node._parents, node._backward(grad)):
            if parent_grad is None or not parent.requires_grad:
                continue
            if parent._id in pending:
                pending[parent._id] = pending[parent._id] + parent_grad
            else:
                pending[parent._id] = parent_grad

    grads: GradientMap = {}
    for parameter in trainables:
        grad = leaf_grads.get(parameter._id)
        if grad is None:
            grad = np.zeros(parameter.shape)
        grad = np.asarray(grad, dtype=np.float64).reshape(parameter.shape)
        if not np.all(np.isfinite(grad)):
            raise NumericFailure(
                f"Non-finite gradient for parameter '{parameter.name}'."
            )
        grads[parameter.name] = grad
    return grads
