"""
Sweeps training settings over a grid on the synthetic world.
"""

from __future__ import annotations

import itertools
import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import TYPE_CHECKING, Any

import pandas as pd

from ..config import SyntheticWorldConfig, TrainConfig
from ..evaluation.report import render_table
from ..structures.enums import ArtifactItem, ClassSplit, ExecutionMode
from ..structures.errors import ValidationError
from ..training.trainer import fit
from .common import open_run, write_manifest
from .synthetic import plain_head, trained_head
from .world import build_world, evaluate_transfer

if TYPE_CHECKING:
    from ..config import Config, EvalConfig
    from .world import SyntheticWorld

logger = logging.getLogger(__name__)

AXIS_ALIASES = {"T": "prompt_length", "J": "prompt_depth"}
AXES = (
    "prompt_length",
    "prompt_depth",
    "loss",
    "target",
    "descriptions",
    "method",
)


def parse_axes(axes: dict[str, list[Any]]) -> dict[str, list[Any]]:
    """Resolves axis aliases and checks every axis is known and non-empty."""
    if not axes:
        raise ValidationError("An ablation needs at least one axis.")
    parsed = {}
    for name, values in axes.items():
        key = AXIS_ALIASES.get(name, name)
        if key not in AXES:
            raise ValidationError(
                f"Unknown ablation axis '{name}'; expected one of "
                f"{', '.join(AXES)}."
            )
        if key in parsed:
            raise ValidationError(f"Ablation axis '{key}' given twice.")
        if not isinstance(values, list) or not values:
            raise ValidationError(f"Ablation axis '{name}' has no values.")
        parsed[key] = values
    return parsed


def run_cell(
    world: SyntheticWorld,
    base: TrainConfig,
    settings: EvalConfig,
    index: int,
    cell: dict[str, Any],
) -> dict[str, Any]:
    """Trains and scores one grid cell, seeded by the root seed + index."""
    overrides = dict(cell)
    descriptions = overrides.pop("descriptions", None)
    config = TrainConfig.from_dict(
        {**base.to_dict(), **overrides, "seed": base.seed + index}
    )
    dataset = world.dataset.split(ClassSplit.BASE)
    if descriptions is not None:
        dataset = dataset.limit_outputs(int(descriptions))
    checkpoint = fit(dataset, world.encoder, config)
    result = evaluate_transfer(
        world, trained_head(world, checkpoint, settings), settings.tag
    )
    logger.info(
        "Cell %d %s: base %.2f%%, novel %.2f%%.",
        index,
        cell,
        100 * result.base.top1,
        100 * result.novel.top1,
    )
    return {
        "cell": index,
        **cell,
        "seed": config.seed,
        "final_loss": checkpoint.final_loss,
        "base": 100.0 * result.base.top1,
        "novel": 100.0 * result.novel.top1,
        "hm": 100.0 * result.harmonic_mean,
    }


def cmd_ablate(config: Config) -> Path:
    """Trains every cell of the configured grid; returns the run directory.

    Cells may run on several worker threads, but rows are always written
    in grid order and each cell's seed depends only on its position.
    """
    axes = parse_axes(config.get("ablate", "axes"))
    workers = int(config.get("ablate", "workers", default=1))
    if workers < 1:
        raise ValidationError("ablate.workers must be at least 1.")
    settings = SyntheticWorldConfig.from_config(config)
    base = TrainConfig.from_config(config, section="synthetic.train")
    context = open_run(config, ExecutionMode.ABLATE)
    evaluation = context.run.evaluation

    world = build_world(
        settings,
        context.run.seed,
        evaluation.template,
        init_text=base.init_text,
    )
    cells = [
        dict(zip(axes, values))
        for values in itertools.product(*axes.values())
    ]
    logger.info("Sweeping %d cells on %d workers.", len(cells), workers)

    def job(item: tuple[int, dict[str, Any]]) -> dict[str, Any]:
        return run_cell(world, base, evaluation, *item)

    with ThreadPoolExecutor(max_workers=workers) as executor:
        rows = list(executor.map(job, enumerate(cells)))

    baseline = evaluate_transfer(
        world, plain_head(world, evaluation), evaluation.tag
    )
    df = pd.DataFrame(rows)
    context.store.save_frame(ArtifactItem.SWEEP, df)
    context.store.save_text(ArtifactItem.SWEEP_TABLE, render_table(df))
    context.store.save_json(
        ArtifactItem.REPORT,
        {
            "axes": axes,
            "baseline": baseline.to_dict(),
            "cells": rows,
        },
    )
    write_manifest(context)
    return context.store.directory
