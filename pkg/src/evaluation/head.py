"""
Classifier heads: one unit text feature per class.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from ..data.curation import build_inputs
from ..data.templates import DEFAULT_INPUT_TEMPLATE
from ..numerics.arrays import normalize_rows
from ..structures.enums import HeadProvenance
from ..structures.errors import ValidationError
from ..training.trainer import ensemble_targets

if TYPE_CHECKING:
    from typing import Sequence

    from ..data.records import ClassRecord, PromptDataset
    from ..encoder.model import TextEncoder
    from ..training.checkpoint import AdapterCheckpoint, PromptCheckpoint


@dataclass(frozen=True)
class ClassifierHead:
    """Class features (re-normalized on creation) plus the logit scale."""

    class_features: np.ndarray
    class_names: tuple[str, ...]
    provenance: HeadProvenance
    temperature: float = 100.0

    def __post_init__(self) -> None:
        features = normalize_rows(self.class_features)
        if features.ndim != 2 or features.shape[0] < 2:
            raise ValidationError("A classifier head needs >= 2 classes.")
        names = tuple(self.class_names)
        if len(names) != features.shape[0]:
            raise ValidationError("Need exactly one name per class row.")
        if self.temperature <= 0:
            raise ValidationError("Head temperature must be positive.")
        features.flags.writeable = False
        object.__setattr__(self, "class_features", features)
        object.__setattr__(self, "class_names", names)
        object.__setattr__(
            self, "provenance", HeadProvenance.parse(self.provenance)
        )

    @property
    def d(self) -> int:
        """Gets the feature width."""
        return self.class_features.shape[1]


def _names(classes: Sequence[ClassRecord]) -> tuple[str, ...]:
    return tuple(record.name for record in classes)


def _inputs(classes: Sequence[ClassRecord], template: str) -> list[str]:
    return list(build_inputs(classes, template).values())


def build_head(
    classes: Sequence[ClassRecord],
    checkpoint: PromptCheckpoint,
    encoder: TextEncoder,
    template: str = DEFAULT_INPUT_TEMPLATE,
    temperature: float = 100.0,
) -> ClassifierHead:
    """Encodes each class-name template with the learned prompts."""
    checkpoint.check_fingerprint(encoder.weights)
    features = encoder.encode_prompted_texts(
        _inputs(classes, template), checkpoint.prompts
    )
    return ClassifierHead(
        features, _names(classes), HeadProvenance.PROMPTED, temperature
    )


def build_head_plain(
    classes: Sequence[ClassRecord],
    encoder: TextEncoder,
    template: str = DEFAULT_INPUT_TEMPLATE,
    temperature: float = 100.0,
) -> ClassifierHead:
    """Encodes each class-name template on the frozen path."""
    features = encoder.encode_texts(_inputs(classes, template))
    return ClassifierHead(
        features, _names(classes), HeadProvenance.PLAIN_TEMPLATE, temperature
    )


def build_head_ensemble(
    dataset: PromptDataset,
    encoder: TextEncoder,
    temperature: float = 100.0,
) -> ClassifierHead:
    """Averages the normalized frozen description features per class."""
    targets = ensemble_targets(dataset, encoder)
    features = np.stack([targets[c.class_id] for c in dataset.classes])
    return ClassifierHead(
        features,
        _names(dataset.classes),
        HeadProvenance.ENSEMBLED,
        temperature,
    )


def build_head_adapter(
    classes: Sequence[ClassRecord],
    checkpoint: AdapterCheckpoint,
    encoder: TextEncoder,
    template: str = DEFAULT_INPUT_TEMPLATE,
    temperature: float = 100.0,
) -> ClassifierHead:
    """Passes frozen class-name features through a trained adapter."""
    checkpoint.check_fingerprint(encoder.weights)
    normalize = checkpoint.config.normalize_features
    base = encoder.encode_texts(
        _inputs(classes, template), normalize=normalize
    )
    features = checkpoint.adapter.apply(base, normalize=normalize).data
    return ClassifierHead(
        features, _names(classes), HeadProvenance.ADAPTER, temperature
    )
