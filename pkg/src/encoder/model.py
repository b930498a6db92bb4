"""
The frozen text transformer and its deep prompt injection.

Both paths share one batched forward pass over [B, L, D] activations.
The prompted path splices the layer-0 prompts in right after SOS, then,
before each block j < J, overwrites the prompt rows with the layer-j
prompts. Features are read at the recorded EOS position, projected and
(optionally) L2-normalized.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from ..numerics import tensor as ops
from ..numerics.tensor import Tensor
from ..structures.enums import ActivationKind
from ..structures.errors import CapacityOverflowError, ValidationError
from ..utilities import as_chunks
from .vocabulary import TokenSequence, Vocabulary, split_words, tokenize

if TYPE_CHECKING:
    from typing import Iterable, Mapping, Sequence

    from .weights import EncoderWeights

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PromptSet:
    """Learnable prompt vectors, one [T, d_model] tensor per layer."""

    layers: tuple[Tensor, ...]
    init_text: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "layers", tuple(self.layers))
        if not self.layers:
            raise ValidationError("A PromptSet needs at least one layer.")
        shape = self.layers[0].shape
        if len(shape) != 2:
            raise ValidationError(f"Prompt layers must be 2-D, got {shape}.")
        if any(layer.shape != shape for layer in self.layers):
            raise ValidationError("All prompt layers must share one shape.")

    @property
    def length(self) -> int:
        """Gets the number of prompt vectors per layer (T)."""
        return self.layers[0].shape[0]

    @property
    def depth(self) -> int:
        """Gets the number of prompted layers (J)."""
        return len(self.layers)

    @property
    def width(self) -> int:
        """Gets the prompt vector width (d_model)."""
        return self.layers[0].shape[1]

    @staticmethod
    def layer_name(index: int) -> str:
        """Gets the parameter name of a prompt layer."""
        return f"prompts.{index}"

    def parameters(self) -> dict[str, Tensor]:
        """Gets the prompt tensors keyed by parameter name."""
        return {
            self.layer_name(index): layer
            for index, layer in enumerate(self.layers)
        }

    def arrays(self) -> dict[str, np.ndarray]:
        """Gets detached copies of the prompt values."""
        return {
            name: np.array(layer.data)
            for name, layer in self.parameters().items()
        }

    def replace(self, parameters: Mapping[str, Tensor]) -> PromptSet:
        """Creates a new PromptSet from updated parameter tensors."""
        layers = tuple(
            parameters[self.layer_name(index)] for index in range(self.depth)
        )
        return PromptSet(layers=layers, init_text=self.init_text)

    @classmethod
    def from_arrays(
        cls,
        arrays: Mapping[str, np.ndarray],
        init_text: str = "",
    ) -> PromptSet:
        """Creates trainable prompts from arrays named prompts.{j}."""
        depth = len(arrays)
        try:
            layers = tuple(
                Tensor.parameter(arrays[cls.layer_name(j)], cls.layer_name(j))
                for j in range(depth)
            )
        except KeyError as error:
            raise ValidationError(f"Missing prompt layer {error}.") from error
        return cls(layers=layers, init_text=init_text)


def init_prompts(
    weights: EncoderWeights,
    vocab: Vocabulary,
    length: int,
    depth: int,
    init_text: str = "",
    std: float = 0.02,
    seed: int = 0,
) -> PromptSet:
    """Creates the starting prompts.

    Layer 0 takes the token embeddings of init_text, cut or padded with
    random rows up to the prompt length; deeper layers are random.
    """
    config = weights.config
    if length < 0:
        raise ValidationError("Prompt length must be non-negative.")
    if not 1 <= depth <= max(config.num_layers, 1):
        raise ValidationError(
            f"Prompt depth {depth} must lie in [1, {config.num_layers}]."
        )
    rng = np.random.default_rng(seed)
    width = config.d_model
    layers = [rng.normal(0.0, std, (length, width)) for _ in range(depth)]
    if init_text and length > 0:
        ids = [vocab.id_of(word) for word in split_words(init_text)]
        rows = weights.array("token_embedding")[ids[:length]]
        layers[0][: len(rows)] = rows
    arrays = {
        PromptSet.layer_name(j): layer for j, layer in enumerate(layers)
    }
    return PromptSet.from_arrays(arrays, init_text=init_text)


def _activation(kind: ActivationKind):
    """Gets the MLP nonlinearity."""
    match kind:
        case ActivationKind.QUICK_GELU:
            return ops.quick_gelu
        case _:
            return ops.gelu


def _causal_mask(length: int) -> np.ndarray:
    """Gets the [L, L] mask that lets position i attend to j <= i."""
    return np.tril(np.ones((length, length), dtype=bool))


def _block(
    x: Tensor,
    index: int,
    weights: EncoderWeights,
    mask: np.ndarray,
) -> Tensor:
    """Runs one pre-norm transformer block."""
    config = weights.config
    batch, length, width = x.shape
    heads, head_dim = config.num_heads, config.head_dim
    prefix = f"blocks.{index}"

    def w(name: str) -> Tensor:
        return weights.tensor(f"{prefix}.{name}")

    def split_heads(t: Tensor) -> Tensor:
        t = ops.reshape(t, (batch, length, heads, head_dim))
        return ops.transpose(t, (0, 2, 1, 3))

    h = ops.layer_norm(
        x, w("ln_1.weight"), w("ln_1.bias"), config.layer_norm_eps
    )
    q = split_heads(h @ w("attn.q_proj.weight") + w("attn.q_proj.bias"))
    k = split_heads(h @ w("attn.k_proj.weight") + w("attn.k_proj.bias"))
    v = split_heads(h @ w("attn.v_proj.weight") + w("attn.v_proj.bias"))
    scores = ops.matmul(q, ops.transpose(k, (0, 1, 3, 2)))
    probs = ops.softmax(scores * (head_dim**-0.5), axis=-1, mask=mask)
    attended = ops.transpose(ops.matmul(probs, v), (0, 2, 1, 3))
    attended = ops.reshape(attended, (batch, length, width))
    x = x + attended @ w("attn.out_proj.weight") + w("attn.out_proj.bias")

    h = ops.layer_norm(
        x, w("ln_2.weight"), w("ln_2.bias"), config.layer_norm_eps
    )
    h = _activation(config.activation)(
        h @ w("mlp.c_fc.weight") + w("mlp.c_fc.bias")
    )
    return x + h @ w("mlp.c_proj.weight") + w("mlp.c_proj.bias")


def _as_batch(tokens: TokenSequence | Sequence[TokenSequence]):
    """Wraps a single TokenSequence into a list."""
    if isinstance(tokens, TokenSequence):
        return [tokens]
    tokens = list(tokens)
    if not tokens:
        raise ValidationError("Cannot encode an empty batch.")
    return tokens


def _token_ids(
    tokens: Sequence[TokenSequence],
    weights: EncoderWeights,
) -> np.ndarray:
    """Stacks token ids into a [B, L] array, checking their range."""
    config = weights.config
    ids = np.array([sequence.ids for sequence in tokens], dtype=np.int64)
    if ids.shape[1] != config.context_length:
        raise ValidationError(
            f"Token sequences have length {ids.shape[1]}, expected "
            f"{config.context_length}."
        )
    if ids.min() < 0 or ids.max() >= config.vocab_size:
        raise ValidationError("Token id out of vocabulary range.")
    return ids


def _forward(
    tokens: Sequence[TokenSequence],
    weights: EncoderWeights,
    prompts: PromptSet | None = None,
    normalize: bool = True,
    trace: list[np.ndarray] | None = None,
) -> Tensor:
    """Runs the batched forward pass and returns [B, d] features."""
    config = weights.config
    ids = _token_ids(tokens, weights)
    batch, length = ids.shape
    width = config.d_model
    count = prompts.length if prompts is not None else 0
    depth = prompts.depth if prompts is not None else 0
    if prompts is not None:
        if prompts.width != width:
            raise ValidationError(
                f"Prompt width {prompts.width} does not match d_model "
                f"{width}."
            )
        if depth > max(config.num_layers, 1):
            raise ValidationError(
                f"Prompt depth {depth} exceeds {config.num_layers} layers."
            )
    eos = np.array([sequence.eos_position for sequence in tokens]) + count
    if np.any(eos >= length):
        raise CapacityOverflowError(
            f"{count} prompts push EOS past context length {length}."
        )

    embedded = weights.array("token_embedding")[ids]
    if count > 0:
        shape = (batch, count, width)
        x = ops.concat(
            [
                Tensor.constant(embedded[:, :1]),
                ops.broadcast_to(
                    ops.reshape(prompts.layers[0], (1, count, width)), shape
                ),
                Tensor.constant(embedded[:, 1 : length - count]),
            ],
            axis=1,
        )
    else:
        x = Tensor.constant(embedded)
    x = x + weights.tensor("positional_embedding")

    mask = _causal_mask(length)
    for layer in range(config.num_layers):
        if count > 0 and 0 < layer < depth:
            shape = (batch, count, width)
            x = ops.concat(
                [
                    ops.slice_axis(x, 1, 0, 1),
                    ops.broadcast_to(
                        ops.reshape(prompts.layers[layer], (1, count, width)),
                        shape,
                    ),
                    ops.slice_axis(x, 1, 1 + count, length),
                ],
                axis=1,
            )
        if trace is not None:
            trace.append(np.array(x.data))
        x = _block(x, layer, weights, mask)
    if trace is not None:
        trace.append(np.array(x.data))

    x = ops.layer_norm(
        x,
        weights.tensor("ln_final.weight"),
        weights.tensor("ln_final.bias"),
        config.layer_norm_eps,
    )
    features = ops.gather_positions(x, eos) @ weights.tensor(
        "text_projection"
    )
    return ops.l2_normalize(features) if normalize else features


@dataclass(frozen=True)
class TextFeature:
    """One encoded text."""

    vector: np.ndarray
    normalized: bool = True


def encode_batch(
    tokens: TokenSequence | Sequence[TokenSequence],
    weights: EncoderWeights,
    normalize: bool = True,
) -> Tensor:
    """Encodes texts on the frozen path into a [B, d] tensor."""
    return _forward(_as_batch(tokens), weights, normalize=normalize)


def encode_prompted_batch(
    tokens: TokenSequence | Sequence[TokenSequence],
    prompts: PromptSet,
    weights: EncoderWeights,
    normalize: bool = True,
) -> Tensor:
    """Encodes texts with prompts spliced in; gradients reach prompts."""
    return _forward(_as_batch(tokens), weights, prompts, normalize)


def encode(
    tokens: TokenSequence,
    weights: EncoderWeights,
    normalize: bool = True,
) -> TextFeature:
    """Encodes one text on the frozen path."""
    features = encode_batch(tokens, weights, normalize)
    return TextFeature(np.array(features.data[0]), normalized=normalize)


def encode_prompted(
    tokens: TokenSequence,
    prompts: PromptSet,
    weights: EncoderWeights,
    normalize: bool = True,
) -> TextFeature:
    """Encodes one text with prompts spliced in."""
    features = encode_prompted_batch(tokens, prompts, weights, normalize)
    return TextFeature(np.array(features.data[0]), normalized=normalize)


def trace_block_inputs(
    tokens: TokenSequence | Sequence[TokenSequence],
    weights: EncoderWeights,
    prompts: PromptSet | None = None,
) -> list[np.ndarray]:
    """Gets the [B, L, D] input of every block plus the last output."""
    trace: list[np.ndarray] = []
    _forward(_as_batch(tokens), weights, prompts, trace=trace)
    return trace


def nearest_vocab_words(
    prompts: PromptSet,
    weights: EncoderWeights,
    vocab: Vocabulary,
    k: int,
) -> list[list[list[tuple[str, float]]]]:
    """Finds the k closest vocabulary tokens to every prompt vector.

    Returns a list per layer of a list per prompt vector of (token,
    distance) pairs sorted by Euclidean distance, ties by token id.
    """
    embeddings = weights.array("token_embedding")
    if not 1 <= k <= embeddings.shape[0]:
        raise ValidationError(
            f"k must lie in [1, {embeddings.shape[0]}], got {k}."
        )
    table = []
    for layer in prompts.layers:
        rows = []
        for vector in layer.data:
            distances = np.linalg.norm(embeddings - vector, axis=1)
            order = np.argsort(distances, kind="stable")[:k]
            rows.append(
                [(vocab.tokens[i], float(distances[i])) for i in order]
            )
        table.append(rows)
    return table


class TextEncoder:
    """A vocabulary and frozen weights, encoding raw text."""

    def __init__(self, vocab: Vocabulary, weights: EncoderWeights) -> None:
        """Initializes the TextEncoder object."""
        if vocab.size != weights.config.vocab_size:
            raise ValidationError(
                f"Vocabulary has {vocab.size} tokens but the weights expect "
                f"{weights.config.vocab_size}."
            )
        self.vocab = vocab
        self.weights = weights

    @property
    def config(self):
        """Gets the encoder config."""
        return self.weights.config

    @property
    def fingerprint(self) -> str:
        """Gets the fingerprint of the frozen weights."""
        return self.weights.fingerprint

    def tokenize(self, text: str) -> TokenSequence:
        """Tokenizes one text to the context length."""
        return tokenize(text, self.vocab, self.config.context_length)

    def tokenize_many(self, texts: Iterable[str]) -> list[TokenSequence]:
        """Tokenizes many texts."""
        return [self.tokenize(text) for text in texts]

    def encode_texts(
        self,
        texts: Sequence[str],
        normalize: bool = True,
        chunk_size: int = 64,
    ) -> np.ndarray:
        """Encodes texts on the frozen path into a [N, d] array."""
        if not texts:
            return np.zeros((0, self.config.projection_dim))
        chunks = []
        for chunk in as_chunks(texts, chunk_size):
            tokens = self.tokenize_many(chunk)
            chunks.append(encode_batch(tokens, self.weights, normalize).data)
        return np.concatenate(chunks, axis=0)

    def encode_prompted_texts(
        self,
        texts: Sequence[str],
        prompts: PromptSet,
        normalize: bool = True,
        chunk_size: int = 64,
    ) -> np.ndarray:
        """Encodes texts with prompts into a [N, d] array."""
        if not texts:
            return np.zeros((0, self.config.projection_dim))
        chunks = []
        for chunk in as_chunks(texts, chunk_size):
            tokens = self.tokenize_many(chunk)
            features = encode_prompted_batch(
                tokens, prompts, self.weights, normalize
            )
            chunks.append(features.data)
        return np.concatenate(chunks, axis=0)
