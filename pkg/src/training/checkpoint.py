"""
Versioned prompt and adapter checkpoints.

Both use the tensor archive container; the header records the fingerprint
of the encoder weights the tensors were trained against, so they cannot be
silently evaluated with a different encoder.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Any

import pandas as pd

from ..config import TrainConfig
from ..encoder.model import PromptSet
from ..storage.helper import read_archive, write_archive
from ..structures.enums import AdapterKind
from ..structures.errors import (
    ArtifactIOError,
    FingerprintMismatchError,
    ValidationError,
)
from .adapter import AdapterWeights

if TYPE_CHECKING:
    from ..encoder.weights import EncoderWeights

CHECKPOINT_VERSION = 1
TRACE_COLUMNS = ["step", "epoch", "lr", "loss"]


def empty_trace() -> pd.DataFrame:
    """Creates a loss trace with no rows."""
    return pd.DataFrame(columns=TRACE_COLUMNS)


def _check_fingerprint(expected: str, weights: EncoderWeights) -> None:
    """Raises when the weights are not the ones a checkpoint expects."""
    if weights.fingerprint != expected:
        raise FingerprintMismatchError(
            f"Checkpoint was trained against encoder {expected[:12]}, but "
            f"the loaded weights are {weights.fingerprint[:12]}."
        )


@dataclass(frozen=True)
class PromptCheckpoint:
    """Learned prompts ready to ship with the frozen encoder."""

    prompts: PromptSet
    encoder_fingerprint: str
    config: TrainConfig
    final_loss: float | None = None
    version: int = CHECKPOINT_VERSION
    loss_trace: pd.DataFrame = field(
        default_factory=empty_trace, repr=False, compare=False
    )

    def check_fingerprint(self, weights: EncoderWeights) -> None:
        """Raises FingerprintMismatchError for foreign weights."""
        _check_fingerprint(self.encoder_fingerprint, weights)

    def header(self) -> dict[str, Any]:
        """Gets the manifest fields written next to the tensors."""
        return {
            "version": self.version,
            "encoder_fingerprint": self.encoder_fingerprint,
            "T": self.prompts.length,
            "J": self.prompts.depth,
            "init_text": self.prompts.init_text,
            "config": self.config.to_dict(),
            "final_loss": self.final_loss,
        }


@dataclass(frozen=True)
class AdapterCheckpoint:
    """A trained adapter and the encoder it belongs to."""

    adapter: AdapterWeights
    encoder_fingerprint: str
    config: TrainConfig
    final_loss: float | None = None
    version: int = CHECKPOINT_VERSION
    loss_trace: pd.DataFrame = field(
        default_factory=empty_trace, repr=False, compare=False
    )

    def check_fingerprint(self, weights: EncoderWeights) -> None:
        """Raises FingerprintMismatchError for foreign weights."""
        _check_fingerprint(self.encoder_fingerprint, weights)

    def header(self) -> dict[str, Any]:
        """Gets the manifest fields written next to the tensors."""
        return {
            "version": self.version,
            "encoder_fingerprint": self.encoder_fingerprint,
            "kind": self.adapter.kind.label,
            "ratio": self.adapter.ratio,
            "config": self.config.to_dict(),
            "final_loss": self.final_loss,
        }


def save_checkpoint(checkpoint: PromptCheckpoint, path: str | Path):
    """Writes a prompt checkpoint; returns the manifest and blob paths."""
    return write_archive(
        Path(path), checkpoint.header(), checkpoint.prompts.arrays()
    )


def _read(path: str | Path, required: set[str]):
    """Reads an archive and checks its header fields and version."""
    header, tensors = read_archive(Path(path))
    missing = required - set(header)
    if missing:
        raise ArtifactIOError(
            f"Checkpoint '{path}' lacks {', '.join(sorted(missing))}."
        )
    if header["version"] != CHECKPOINT_VERSION:
        raise ValidationError(
            f"Checkpoint '{path}' has unsupported version "
            f"{header['version']}."
        )
    return header, tensors


def load_checkpoint(path: str | Path) -> PromptCheckpoint:
    """Reads a prompt checkpoint."""
    header, tensors = _read(
        path, {"version", "encoder_fingerprint", "T", "J", "config"}
    )
    prompts = PromptSet.from_arrays(tensors, header.get("init_text", ""))
    if (prompts.length, prompts.depth) != (header["T"], header["J"]):
        raise ValidationError(
            f"Checkpoint '{path}' tensors do not match T and J."
        )
    return PromptCheckpoint(
        prompts=prompts,
        encoder_fingerprint=header["encoder_fingerprint"],
        config=TrainConfig.from_dict(header["config"]),
        final_loss=header.get("final_loss"),
        version=header["version"],
    )


def save_adapter(checkpoint: AdapterCheckpoint, path: str | Path):
    """Writes an adapter checkpoint; returns the manifest and blob paths."""
    return write_archive(
        Path(path), checkpoint.header(), checkpoint.adapter.arrays()
    )


def load_adapter(path: str | Path) -> AdapterCheckpoint:
    """Reads an adapter checkpoint."""
    header, tensors = _read(
        path, {"version", "encoder_fingerprint", "kind", "ratio", "config"}
    )
    adapter = AdapterWeights.from_arrays(
        AdapterKind.parse(header["kind"]), tensors, float(header["ratio"])
    )
    return AdapterCheckpoint(
        adapter=adapter,
        encoder_fingerprint=header["encoder_fingerprint"],
        config=TrainConfig.from_dict(header["config"]),
        final_loss=header.get("final_loss"),
        version=header["version"],
    )
