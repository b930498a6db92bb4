"""
Shape, storage and seeded initialization of the frozen encoder weights.

Tensor names (all matrices are applied as x @ W, so W is [in, out]):

    token_embedding                 [vocab_size, d_model]
    positional_embedding            [context_length, d_model]
    blocks.{i}.ln_1.weight / .bias  [d_model]
    blocks.{i}.attn.{q,k,v}_proj.weight  [d_model, d_model]
    blocks.{i}.attn.{q,k,v}_proj.bias    [d_model]
    blocks.{i}.attn.out_proj.weight      [d_model, d_model]
    blocks.{i}.attn.out_proj.bias        [d_model]
    blocks.{i}.ln_2.weight / .bias  [d_model]
    blocks.{i}.mlp.c_fc.weight      [d_model, hidden]
    blocks.{i}.mlp.c_fc.bias        [hidden]
    blocks.{i}.mlp.c_proj.weight    [hidden, d_model]
    blocks.{i}.mlp.c_proj.bias      [d_model]
    ln_final.weight / .bias         [d_model]
    text_projection                 [d_model, projection_dim]
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np

from ..numerics.tensor import Tensor
from ..storage.helper import read_archive, write_archive
from ..structures.enums import ActivationKind
from ..structures.errors import ArtifactIOError, ValidationError

if TYPE_CHECKING:
    from typing import Mapping, Self

WEIGHTS_FORMAT = "textprompts-encoder-weights"


@dataclass(frozen=True)
class EncoderConfig:
    """Shape of the text transformer."""

    vocab_size: int
    num_layers: int
    d_model: int
    num_heads: int
    mlp_ratio: float
    context_length: int
    projection_dim: int
    activation: ActivationKind = ActivationKind.GELU_TANH
    layer_norm_eps: float = 1e-5

    def __post_init__(self) -> None:
        """Validates the shape settings."""
        object.__setattr__(
            self, "activation", ActivationKind.parse(self.activation)
        )
        for name in ("vocab_size", "d_model", "num_heads", "projection_dim"):
            if getattr(self, name) < 1:
                raise ValidationError(f"Encoder {name} must be positive.")
        if self.num_layers < 0:
            raise ValidationError("Encoder num_layers must be >= 0.")
        if self.d_model % self.num_heads != 0:
            raise ValidationError("d_model must be divisible by num_heads.")
        if self.context_length < 3:
            raise ValidationError("context_length must be at least 3.")
        if self.mlp_ratio <= 0:
            raise ValidationError("mlp_ratio must be positive.")

    @property
    def head_dim(self) -> int:
        """Gets the width of one attention head."""
        return self.d_model // self.num_heads

    @property
    def hidden_width(self) -> int:
        """Gets the width of the MLP hidden layer."""
        return max(1, int(round(self.d_model * self.mlp_ratio)))

    def to_dict(self) -> dict:
        """Converts the config into JSON-friendly values."""
        values = asdict(self)
        values["activation"] = self.activation.label
        return values

    @classmethod
    def from_dict(cls, values: Mapping) -> Self:
        """Creates a config from JSON values."""
        try:
            return cls(**values)
        except TypeError as error:
            raise ValidationError(f"Bad encoder config: {error}") from error


def expected_shapes(config: EncoderConfig) -> dict[str, tuple[int, ...]]:
    """Gets the name and shape of every weight tensor."""
    d = config.d_model
    h = config.hidden_width
    shapes = {
        "token_embedding": (config.vocab_size, d),
        "positional_embedding": (config.context_length, d),
        "ln_final.weight": (d,),
        "ln_final.bias": (d,),
        "text_projection": (d, config.projection_dim),
    }
    for i in range(config.num_layers):
        prefix = f"blocks.{i}"
        for norm in ("ln_1", "ln_2"):
            shapes[f"{prefix}.{norm}.weight"] = (d,)
            shapes[f"{prefix}.{norm}.bias"] = (d,)
        for proj in ("q_proj", "k_proj", "v_proj", "out_proj"):
            shapes[f"{prefix}.attn.{proj}.weight"] = (d, d)
            shapes[f"{prefix}.attn.{proj}.bias"] = (d,)
        shapes[f"{prefix}.mlp.c_fc.weight"] = (d, h)
        shapes[f"{prefix}.mlp.c_fc.bias"] = (h,)
        shapes[f"{prefix}.mlp.c_proj.weight"] = (h, d)
        shapes[f"{prefix}.mlp.c_proj.bias"] = (d,)
    return shapes


@dataclass(frozen=True)
class EncoderWeights:
    """The frozen parameters of the text encoder.

    Arrays are private read-only copies, and the tensors handed to the
    forward pass are frozen leaves, so no gradient can ever reach them.
    """

    config: EncoderConfig
    arrays: Mapping[str, np.ndarray]
    _tensors: dict[str, Tensor] = field(
        default_factory=dict, init=False, repr=False, compare=False
    )
    _fingerprint: list[str] = field(
        default_factory=list, init=False, repr=False, compare=False
    )

    def __post_init__(self) -> None:
        """Checks names and shapes, then freezes every array."""
        shapes = expected_shapes(self.config)
        missing = set(shapes) - set(self.arrays)
        extra = set(self.arrays) - set(shapes)
        if missing or extra:
            raise ValidationError(
                f"Encoder weights mismatch: missing {sorted(missing)}, "
                f"unexpected {sorted(extra)}."
            )
        frozen = {}
        tensors = {}
        for name in sorted(shapes):
            array = np.array(self.arrays[name], dtype=np.float64)
            if array.shape != shapes[name]:
                raise ValidationError(
                    f"Weight '{name}' has shape {array.shape}, "
                    f"expected {shapes[name]}."
                )
            array.flags.writeable = False
            frozen[name] = array
            tensors[name] = Tensor.constant(array)
        object.__setattr__(self, "arrays", frozen)
        object.__setattr__(self, "_tensors", tensors)

    def array(self, name: str) -> np.ndarray:
        """Gets a weight as a read-only array."""
        return self.arrays[name]

    def tensor(self, name: str) -> Tensor:
        """Gets a weight as a frozen tensor."""
        return self._tensors[name]

    @property
    def fingerprint(self) -> str:
        """Gets the sha256 of the config and every weight value."""
        if not self._fingerprint:
            self._fingerprint.append(fingerprint(self))
        return self._fingerprint[0]


def fingerprint(weights: EncoderWeights) -> str:
    """Hashes the encoder config and all weight bytes in name order."""
    digest = hashlib.sha256()
    config = json.dumps(weights.config.to_dict(), sort_keys=True)
    digest.update(config.encode("utf-8"))
    for name in sorted(weights.arrays):
        array = weights.arrays[name]
        digest.update(name.encode("utf-8"))
        digest.update(str(array.shape).encode("utf-8"))
        digest.update(np.ascontiguousarray(array, dtype="<f8").tobytes())
    return digest.hexdigest()


def init_weights(config: EncoderConfig, seed: int) -> EncoderWeights:
    """Creates seeded random weights for desk-scale experiments.

    Projections are scaled by 1 / sqrt(fan_in) so every attention and MLP
    branch adds a contribution comparable to the token embedding itself.
    """
    rng = np.random.default_rng(seed)
    arrays = {}
    for name, shape in expected_shapes(config).items():
        if name == "token_embedding":
            arrays[name] = rng.normal(0.0, 1.0, shape)
        elif name == "positional_embedding":
            arrays[name] = rng.normal(0.0, 0.1, shape)
        elif name.endswith("ln_1.weight") or name.endswith("ln_2.weight"):
            arrays[name] = np.ones(shape)
        elif name == "ln_final.weight":
            arrays[name] = np.ones(shape)
        elif name.endswith(".bias"):
            arrays[name] = rng.normal(0.0, 0.02, shape)
        else:
            arrays[name] = rng.normal(0.0, shape[0] ** -0.5, shape)
    return EncoderWeights(config=config, arrays=arrays)


def save_weights(weights: EncoderWeights, path: str | Path) -> list[Path]:
    """Writes the weights manifest and blob."""
    header = {
        "format": WEIGHTS_FORMAT,
        "config": weights.config.to_dict(),
        "fingerprint": weights.fingerprint,
    }
    return write_archive(Path(path), header, weights.arrays)


def load_weights(path: str | Path) -> EncoderWeights:
    """Reads a weights manifest and blob."""
    header, arrays = read_archive(Path(path))
    if "config" not in header:
        raise ArtifactIOError(f"Weights file '{path}' has no config.")
    config = EncoderConfig.from_dict(header["config"])
    return EncoderWeights(config=config, arrays=arrays)
