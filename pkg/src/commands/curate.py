"""
Curates a text-to-text dataset and writes it into a run directory.
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import TYPE_CHECKING

from ..config import CurateConfig
from ..data.client import LlmClient
from ..data.curation import curate, save_dataset
from ..data.records import load_classes
from ..structures.enums import ArtifactItem, CurationMode, ExecutionMode
from .common import open_run, write_manifest

if TYPE_CHECKING:
    from ..config import Config

logger = logging.getLogger(__name__)

HANDCRAFTED_MODES = (
    CurationMode.HANDCRAFTED_80,
    CurationMode.HANDCRAFTED_ATTRIBUTE,
)


def cmd_curate(config: Config) -> Path:
    """Builds a dataset from a class list; returns the run directory."""
    settings = CurateConfig.from_config(config)
    context = open_run(config, ExecutionMode.CURATE)
    classes = load_classes(context.input_path("classes"))

    client = None
    if settings.mode not in HANDCRAFTED_MODES:
        client = LlmClient.from_config(config, settings)

    dataset = curate(classes, settings, client)
    paths = save_dataset(
        dataset, context.store.get_path(ArtifactItem.DATASET)
    )
    context.store.register(*paths)
    write_manifest(context)
    return context.store.directory
