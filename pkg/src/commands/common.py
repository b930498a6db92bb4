"""
Plumbing shared by every command: run directories, inputs and manifests.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING

from ..config import RunConfig
from ..encoder.model import TextEncoder
from ..encoder.vocabulary import Vocabulary
from ..encoder.weights import load_weights
from ..storage.handler import ArtifactStore
from ..storage.helper import get_blob_path
from ..structures.enums import ArtifactItem
from ..utilities import get_iso_datetime, get_version, hash_file

if TYPE_CHECKING:
    from ..config import Config
    from ..structures.enums import ExecutionMode

logger = logging.getLogger(__name__)


@dataclass
class RunContext:
    """The state of one command invocation."""

    config: Config
    run: RunConfig
    store: ArtifactStore
    inputs: list[Path] = field(default_factory=list)

    def add_input(self, path: Path, with_blob: bool = False) -> Path:
        """Records an input file (and its tensor blob) for the manifest."""
        self.inputs.append(Path(path))
        if with_blob:
            self.inputs.append(get_blob_path(Path(path)))
        return path

    def input_path(self, key: str, with_blob: bool = False) -> Path:
        """Resolves a configured path and records it as an input."""
        return self.add_input(self.config.get_path(key), with_blob)


def open_run(config: Config, mode: ExecutionMode) -> RunContext:
    """Validates the run config and creates a fresh run directory."""
    run = RunConfig.from_config(config, mode)
    directory = run.prepare()
    logger.info(
        "Writing %s run '%s' to %s.", mode.label, run.run_id, directory
    )
    return RunContext(config=config, run=run, store=ArtifactStore(directory))


def load_encoder(context: RunContext) -> TextEncoder:
    """Loads the configured vocabulary and weights."""
    vocab = Vocabulary.load(context.input_path("vocab"))
    weights = load_weights(context.input_path("weights", with_blob=True))
    return TextEncoder(vocab, weights)


def write_manifest(context: RunContext) -> Path:
    """Writes the run manifest: config, seed, version and file hashes.

    The manifest holds nothing that varies between identical reruns; the
    wall-clock timestamp goes to a separate run log.
    """
    manifest = {
        "command": context.run.mode.label,
        "run_id": context.run.run_id,
        "seed": context.run.seed,
        "version": get_version(),
        "config": context.config.snapshot(),
        "inputs": {
            str(path): hash_file(path) for path in sorted(set(context.inputs))
        },
        "outputs": context.store.output_hashes(),
    }
    path = context.store.get_path(ArtifactItem.MANIFEST)
    context.store.save_json(ArtifactItem.MANIFEST, manifest)
    context.store.save_json(
        ArtifactItem.RUN_LOG,
        {"run_id": context.run.run_id, "created": get_iso_datetime()},
    )
    logger.info("Run manifest written to %s.", path)
    return path
