"""
Runs a base-to-novel transfer experiment on the synthetic world.
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import TYPE_CHECKING

from ..config import SyntheticWorldConfig, TrainConfig
from ..data.curation import save_dataset
from ..encoder.weights import save_weights
from ..evaluation.features import save_features
from ..evaluation.head import (
    build_head,
    build_head_adapter,
    build_head_ensemble,
    build_head_plain,
)
from ..evaluation.report import render_table, transfer_frame
from ..structures.enums import (
    ArtifactItem,
    ClassSplit,
    ExecutionMode,
    HeadProvenance,
)
from ..training.checkpoint import AdapterCheckpoint
from ..training.trainer import fit
from .common import open_run, write_manifest
from .train import save_trained
from .world import build_world, evaluate_transfer

if TYPE_CHECKING:
    from typing import Callable, Sequence

    from ..config import Config, EvalConfig
    from ..data.records import ClassRecord
    from ..evaluation.head import ClassifierHead
    from ..evaluation.report import TransferReport
    from ..training.checkpoint import PromptCheckpoint
    from .common import RunContext
    from .world import SyntheticWorld

logger = logging.getLogger(__name__)


def trained_head(
    world: SyntheticWorld,
    checkpoint: PromptCheckpoint | AdapterCheckpoint,
    settings: EvalConfig,
) -> Callable[[Sequence[ClassRecord]], ClassifierHead]:
    """Creates a head builder for a prompt or adapter checkpoint."""
    if isinstance(checkpoint, AdapterCheckpoint):
        build = build_head_adapter
    else:
        build = build_head
    return lambda classes: build(
        classes,
        checkpoint,
        world.encoder,
        world.template,
        settings.temperature,
    )


def plain_head(
    world: SyntheticWorld,
    settings: EvalConfig,
) -> Callable[[Sequence[ClassRecord]], ClassifierHead]:
    """Creates a head builder for the frozen class-name template."""
    return lambda classes: build_head_plain(
        classes, world.encoder, world.template, settings.temperature
    )


def ensembled_head(
    world: SyntheticWorld,
    settings: EvalConfig,
) -> Callable[[Sequence[ClassRecord]], ClassifierHead]:
    """Creates a head builder averaging each class's descriptions."""
    return lambda classes: build_head_ensemble(
        world.dataset.subset(record.class_id for record in classes),
        world.encoder,
        settings.temperature,
    )


def run_transfer(
    world: SyntheticWorld,
    config: TrainConfig,
    settings: EvalConfig,
) -> tuple[PromptCheckpoint | AdapterCheckpoint, dict[str, TransferReport]]:
    """Trains on base classes and scores every head on both splits."""
    checkpoint = fit(
        world.dataset.split(ClassSplit.BASE), world.encoder, config
    )
    trained = (
        HeadProvenance.ADAPTER
        if isinstance(checkpoint, AdapterCheckpoint)
        else HeadProvenance.PROMPTED
    )
    results = {
        HeadProvenance.PLAIN_TEMPLATE.label: evaluate_transfer(
            world, plain_head(world, settings), settings.tag
        ),
        HeadProvenance.ENSEMBLED.label: evaluate_transfer(
            world, ensembled_head(world, settings), settings.tag
        ),
        trained.label: evaluate_transfer(
            world, trained_head(world, checkpoint, settings), settings.tag
        ),
    }
    return checkpoint, results


def save_world(context: RunContext, world: SyntheticWorld) -> None:
    """Writes the world's vocabulary, weights, dataset and images."""
    store = context.store
    encoder = world.encoder
    store.register(
        encoder.vocab.save(store.get_path(ArtifactItem.VOCABULARY)),
        *save_weights(encoder.weights, store.get_path(ArtifactItem.WEIGHTS)),
        *save_dataset(world.dataset, store.get_path(ArtifactItem.DATASET)),
        *save_features(world.images, store.get_path(ArtifactItem.FEATURES)),
    )


def cmd_synthetic(config: Config) -> Path:
    """Builds the world, trains on base classes and reports transfer."""
    settings = SyntheticWorldConfig.from_config(config)
    train_config = TrainConfig.from_config(config, section="synthetic.train")
    context = open_run(config, ExecutionMode.SYNTHETIC)
    evaluation = context.run.evaluation

    world = build_world(
        settings,
        context.run.seed,
        evaluation.template,
        init_text=train_config.init_text,
    )
    save_world(context, world)
    checkpoint, results = run_transfer(world, train_config, evaluation)
    save_trained(context, checkpoint)

    report = {
        "world": {
            "classes": settings.classes,
            "base_classes": settings.base_classes,
            "novel_classes": settings.novel_classes,
            "sigma": settings.sigma,
            "encoder_fingerprint": world.encoder.fingerprint,
        },
        "final_loss": checkpoint.final_loss,
        "heads": {name: result.to_dict() for name, result in results.items()},
    }
    table = render_table(transfer_frame(results))
    context.store.save_json(ArtifactItem.REPORT, report)
    context.store.save_text(ArtifactItem.REPORT_TABLE, table)
    logger.info("Transfer results:\n%s", table)
    write_manifest(context)
    return context.store.directory
