"""
Trains prompts (or adapter baselines) to map class-name inputs onto the
frozen features of their descriptions.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np
import pandas as pd
from tqdm import tqdm

from ..encoder.model import encode_prompted_batch, init_prompts
from ..numerics.arrays import cosine_similarity, mean_direction
from ..numerics.optim import LrSchedule, OptimizerState, adamw_step, lr_at
from ..numerics.tensor import Tensor, backward
from ..structures.enums import AdapterKind, TargetMode, TrainMethod
from ..structures.errors import (
    CapacityOverflowError,
    DegenerateEnsembleError,
    ValidationError,
)
from .adapter import init_adapter
from .checkpoint import (
    TRACE_COLUMNS,
    AdapterCheckpoint,
    PromptCheckpoint,
)
from .losses import mapping_loss

if TYPE_CHECKING:
    from typing import Callable

    from ..config import TrainConfig
    from ..data.records import PromptDataset
    from ..encoder.model import TextEncoder
    from ..encoder.vocabulary import TokenSequence

    LossFunction = Callable[[dict[str, Tensor], np.ndarray], Tensor]

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainingPairs:
    """Unique tokenized inputs, the input of each pair and its target."""

    inputs: list[TokenSequence]
    input_index: np.ndarray
    targets: np.ndarray

    def __len__(self) -> int:
        return len(self.input_index)

    def batch(self, indices: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Gets the unique inputs of a batch and a one-hot row selector.

        selector @ features(unique) gives one feature row per pair, so
        every distinct input runs through the encoder once per step.
        """
        unique, inverse = np.unique(
            self.input_index[indices], return_inverse=True
        )
        selector = np.zeros((len(indices), len(unique)))
        selector[np.arange(len(indices)), inverse] = 1.0
        return unique, selector


def ensemble_targets(
    dataset: PromptDataset,
    encoder: TextEncoder,
    normalize: bool = True,
) -> dict[int, np.ndarray]:
    """Averages the frozen description features of each class.

    Normalized targets are the mean direction of the unit features; raw
    targets are the plain mean of the raw features.
    """
    targets = {}
    for class_id, outputs in dataset.outputs_by_class().items():
        if not outputs:
            raise DegenerateEnsembleError(
                f"Class {class_id} has no descriptions to ensemble."
            )
        if normalize:
            targets[class_id] = mean_direction(encoder.encode_texts(outputs))
        else:
            raw = encoder.encode_texts(outputs, normalize=False)
            targets[class_id] = raw.mean(axis=0)
    return targets


def prepare_pairs(
    dataset: PromptDataset,
    encoder: TextEncoder,
    config: TrainConfig,
    prompt_length: int | None = None,
) -> TrainingPairs:
    """Tokenizes inputs and precomputes the frozen target features."""
    if prompt_length is None:
        prompt_length = config.prompt_length
    if not dataset.pairs:
        raise ValidationError("Cannot train on an empty dataset.")
    texts = sorted({pair.input_text for pair in dataset.pairs})
    position = {text: index for index, text in enumerate(texts)}
    inputs = encoder.tokenize_many(texts)
    capacity = encoder.config.context_length
    for sequence in inputs:
        if sequence.eos_position + prompt_length >= capacity:
            raise CapacityOverflowError(
                f"'{sequence.source_text}' plus {prompt_length} "
                f"prompts does not fit context length {capacity}."
            )
    input_index = np.array([position[p.input_text] for p in dataset.pairs])
    match config.target:
        case TargetMode.ENSEMBLED:
            ensembled = ensemble_targets(
                dataset, encoder, normalize=config.normalize_features
            )
            targets = np.stack([ensembled[p.class_id] for p in dataset.pairs])
        case _:
            targets = encoder.encode_texts(
                [pair.output_text for pair in dataset.pairs],
                normalize=config.normalize_features,
            )
    return TrainingPairs(inputs, input_index, targets)


def make_schedule(config: TrainConfig, count: int) -> LrSchedule:
    """Builds the lr schedule, keeping warmup shorter than training."""
    return LrSchedule(
        base_lr=config.lr,
        warmup_epochs=min(config.warmup_epochs, max(config.epochs - 1, 0)),
        total_epochs=config.epochs,
        steps_per_epoch=math.ceil(count / config.batch_size),
        kind=config.schedule,
    )


def optimize(
    params: dict[str, Tensor],
    loss_function: LossFunction,
    count: int,
    config: TrainConfig,
) -> tuple[dict[str, Tensor], pd.DataFrame]:
    """Runs the shuffled mini-batch AdamW loop.

    Each epoch visits the pairs in a seeded random order. The trace holds
    one row per update with the loss measured before that update.
    """
    schedule = make_schedule(config, count)
    state = OptimizerState(
        lr=config.lr,
        beta1=config.beta1,
        beta2=config.beta2,
        eps=config.eps,
        weight_decay=config.weight_decay,
    )
    rng = np.random.default_rng(config.seed)
    rows = []
    epochs = tqdm(range(config.epochs), desc="Training", leave=False)
    for epoch in epochs:
        order = rng.permutation(count)
        for start in range(0, count, config.batch_size):
            indices = order[start : start + config.batch_size]
            loss = loss_function(params, indices)
            grads = backward(loss, params.values())
            lr = lr_at(state.step, schedule)
            params, state = adamw_step(params, grads, state, lr=lr)
            rows.append((state.step, epoch, lr, loss.item()))
        epochs.set_postfix(loss=f"{rows[-1][3]:.5f}")
        logger.debug("Epoch %d finished at loss %.6f.", epoch, rows[-1][3])
    return params, pd.DataFrame(rows, columns=TRACE_COLUMNS)


def _final_loss(trace: pd.DataFrame) -> float | None:
    """Gets the last traced loss."""
    return float(trace["loss"].iloc[-1]) if len(trace) else None


def _log_fit(predicted: np.ndarray, targets: np.ndarray) -> None:
    """Logs how close the trained features ended up to their targets."""
    logger.info(
        "Mean cosine to targets after training: %.4f.",
        float(cosine_similarity(predicted, targets).mean()),
    )


def train(
    dataset: PromptDataset,
    encoder: TextEncoder,
    config: TrainConfig,
) -> PromptCheckpoint:
    """Learns prompts that map each input onto its description feature."""
    config = config.with_depth_limit(max(encoder.config.num_layers, 1))
    weights = encoder.weights
    pairs = prepare_pairs(dataset, encoder, config)
    prompts = init_prompts(
        weights,
        encoder.vocab,
        config.prompt_length,
        config.prompt_depth,
        init_text=config.init_text,
        std=config.prompt_init_std,
        seed=config.seed,
    )
    if config.prompt_length == 0:
        logger.warning("Prompt length is 0; nothing to train.")
        return PromptCheckpoint(prompts, encoder.fingerprint, config)

    def loss_function(params: dict[str, Tensor], indices: np.ndarray):
        unique, selector = pairs.batch(indices)
        features = encode_prompted_batch(
            [pairs.inputs[i] for i in unique],
            prompts.replace(params),
            weights,
            normalize=config.normalize_features,
        )
        predicted = Tensor.constant(selector) @ features
        return mapping_loss(
            predicted,
            Tensor.constant(pairs.targets[indices]),
            config.loss,
            config.temperature,
        )

    logger.info(
        "Training T=%d J=%d prompts on %d pairs for %d epochs.",
        prompts.length,
        prompts.depth,
        len(pairs),
        config.epochs,
    )
    params, trace = optimize(
        prompts.parameters(), loss_function, len(pairs), config
    )
    trained = prompts.replace(params)
    features = encode_prompted_batch(
        pairs.inputs, trained, weights, normalize=config.normalize_features
    )
    _log_fit(features.data[pairs.input_index], pairs.targets)
    return PromptCheckpoint(
        prompts=trained,
        encoder_fingerprint=encoder.fingerprint,
        config=config,
        final_loss=_final_loss(trace),
        loss_trace=trace,
    )


def train_adapter(
    dataset: PromptDataset,
    encoder: TextEncoder,
    config: TrainConfig,
    kind: AdapterKind,
) -> AdapterCheckpoint:
    """Learns a residual adapter on the frozen class-name features."""
    pairs = prepare_pairs(dataset, encoder, config, prompt_length=0)
    normalize = config.normalize_features
    base = encoder.encode_texts(
        [seq.source_text for seq in pairs.inputs], normalize=normalize
    )
    adapter = init_adapter(
        kind,
        base.shape[1],
        reduction=config.adapter_reduction,
        ratio=config.adapter_ratio,
        seed=config.seed,
    )

    def loss_function(params: dict[str, Tensor], indices: np.ndarray):
        features = base[pairs.input_index[indices]]
        return mapping_loss(
            adapter.replace(params).apply(features, normalize=normalize),
            Tensor.constant(pairs.targets[indices]),
            config.loss,
            config.temperature,
        )

    logger.info(
        "Training a %s adapter on %d pairs for %d epochs.",
        adapter.kind.label,
        len(pairs),
        config.epochs,
    )
    params, trace = optimize(
        adapter.parameters(), loss_function, len(pairs), config
    )
    trained = adapter.replace(params)
    adapted = trained.apply(base, normalize=normalize).data
    _log_fit(adapted[pairs.input_index], pairs.targets)
    return AdapterCheckpoint(
        adapter=trained,
        encoder_fingerprint=encoder.fingerprint,
        config=config,
        final_loss=_final_loss(trace),
        loss_trace=trace,
    )


def fit(
    dataset: PromptDataset,
    encoder: TextEncoder,
    config: TrainConfig,
) -> PromptCheckpoint | AdapterCheckpoint:
    """Trains whatever the config's method names."""
    match config.method:
        case TrainMethod.LINEAR_ADAPTER:
            return train_adapter(dataset, encoder, config, AdapterKind.LINEAR)
        case TrainMethod.MLP_ADAPTER:
            return train_adapter(dataset, encoder, config, AdapterKind.MLP)
        case _:
            return train(dataset, encoder, config)
