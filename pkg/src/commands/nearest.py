"""
Lists the vocabulary tokens closest to each learned prompt vector.
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import TYPE_CHECKING

import pandas as pd

from ..encoder.model import nearest_vocab_words
from ..evaluation.report import render_table
from ..structures.enums import ArtifactItem, ExecutionMode
from ..training.checkpoint import load_checkpoint
from .common import load_encoder, open_run, write_manifest

if TYPE_CHECKING:
    from ..config import Config

logger = logging.getLogger(__name__)


def nearest_words_frame(
    table: list[list[list[tuple[str, float]]]],
) -> pd.DataFrame:
    """Flattens the nearest-word table into one row per neighbour."""
    return pd.DataFrame(
        [
            {
                "layer": layer,
                "position": position,
                "rank": rank,
                "token": token,
                "distance": distance,
            }
            for layer, rows in enumerate(table)
            for position, neighbours in enumerate(rows)
            for rank, (token, distance) in enumerate(neighbours)
        ],
        columns=["layer", "position", "rank", "token", "distance"],
    )


def cmd_inspect(config: Config) -> Path:
    """Writes the nearest-word table of a checkpoint."""
    context = open_run(config, ExecutionMode.INSPECT)
    encoder = load_encoder(context)
    checkpoint = load_checkpoint(
        context.input_path("checkpoint", with_blob=True)
    )
    checkpoint.check_fingerprint(encoder.weights)

    table = nearest_vocab_words(
        checkpoint.prompts,
        encoder.weights,
        encoder.vocab,
        int(config.get("inspect", "k")),
    )
    text = render_table(nearest_words_frame(table))
    context.store.save_text(ArtifactItem.NEAREST_WORDS, text)
    logger.info("Nearest words:\n%s", text)
    write_manifest(context)
    return context.store.directory
