"""
Trains prompts (or an adapter) on a dataset against a frozen encoder.
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import TYPE_CHECKING

from ..data.curation import load_dataset
from ..structures.enums import ArtifactItem, ExecutionMode
from ..training.checkpoint import (
    AdapterCheckpoint,
    save_adapter,
    save_checkpoint,
)
from ..training.trainer import fit
from .common import load_encoder, open_run, write_manifest

if TYPE_CHECKING:
    from ..config import Config
    from ..training.checkpoint import PromptCheckpoint
    from .common import RunContext

logger = logging.getLogger(__name__)


def save_trained(
    context: RunContext,
    checkpoint: PromptCheckpoint | AdapterCheckpoint,
) -> Path:
    """Writes a checkpoint and its loss trace into the run directory."""
    store = context.store
    if isinstance(checkpoint, AdapterCheckpoint):
        paths = save_adapter(checkpoint, store.get_path(ArtifactItem.ADAPTER))
    else:
        paths = save_checkpoint(
            checkpoint, store.get_path(ArtifactItem.CHECKPOINT)
        )
    store.register(*paths)
    store.save_frame(ArtifactItem.LOSS_TRACE, checkpoint.loss_trace)
    return paths[0]


def cmd_train(config: Config) -> Path:
    """Trains on the configured dataset; returns the run directory."""
    context = open_run(config, ExecutionMode.TRAIN)
    encoder = load_encoder(context)
    dataset = load_dataset(context.input_path("dataset"))

    checkpoint = fit(dataset, encoder, context.run.train)
    if checkpoint.final_loss is not None:
        logger.info("Final training loss %.6f.", checkpoint.final_loss)
    save_trained(context, checkpoint)
    write_manifest(context)
    return context.store.directory
