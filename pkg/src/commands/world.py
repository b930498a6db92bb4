"""
The seeded desk-scale world used by the synthetic and ablate commands.

Every class gets a pseudo name, a few class-distinctive words and a pool
of template descriptions mixing its name, its distinctive words and
generic words. Image features are noisy copies of the ensembled frozen
description features, so descriptions stand in for what images show.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from ..data.curation import assemble_dataset, build_inputs
from ..data.records import ClassRecord
from ..encoder.model import TextEncoder
from ..encoder.vocabulary import Vocabulary
from ..encoder.weights import EncoderConfig, init_weights
from ..evaluation.features import synthesize_image_features
from ..evaluation.head import build_head_ensemble
from ..evaluation.report import TransferReport, evaluate
from ..structures.enums import ClassSplit, PairSource

if TYPE_CHECKING:
    from typing import Callable

    from ..config import SyntheticWorldConfig
    from ..data.records import PromptDataset
    from ..evaluation.features import ImageFeatureSet
    from ..evaluation.head import ClassifierHead

logger = logging.getLogger(__name__)

GENERIC_WORDS = (
    "small",
    "large",
    "bright",
    "dark",
    "round",
    "long",
    "soft",
    "rough",
    "green",
    "red",
    "blue",
    "striped",
    "spotted",
    "shiny",
    "wooden",
    "metal",
    "furry",
    "smooth",
    "tall",
    "thin",
)

DESCRIPTION_PATTERNS = (
    "a {CLS} has {D} and {G} {G} parts",
    "the {CLS} looks like a {G} thing with {D}",
    "a photo of a {CLS} shows {D} {G} and {D}",
    "you can identify a {CLS} by its {D} and {G} shape",
    "an image of a {CLS} with {G} {D} in a {G} scene",
)

_SLOT = re.compile(r"\{(CLS|D|G)\}")


@dataclass(frozen=True)
class SyntheticWorld:
    """A toy encoder, its class descriptions and matching images."""

    encoder: TextEncoder
    classes: tuple[ClassRecord, ...]
    dataset: PromptDataset
    images: ImageFeatureSet
    template: str

    def split_classes(self, which: ClassSplit) -> list[ClassRecord]:
        """Gets the classes on one side of the split."""
        return [record for record in self.classes if record.split == which]


def class_name(index: int) -> str:
    """Gets the pseudo name of a class."""
    return f"cls{index:02d}"


def distinct_words(index: int, count: int) -> list[str]:
    """Gets the class-distinctive words of a class."""
    return [f"w{index:02d}{chr(ord('a') + j)}" for j in range(count)]


def describe(
    name: str,
    words: list[str],
    rng: np.random.Generator,
) -> str:
    """Fills a random description pattern for one class."""
    pattern = DESCRIPTION_PATTERNS[rng.integers(len(DESCRIPTION_PATTERNS))]

    def fill(slot: re.Match) -> str:
        match slot.group(1):
            case "CLS":
                return name
            case "D":
                return words[rng.integers(len(words))]
            case _:
                return GENERIC_WORDS[rng.integers(len(GENERIC_WORDS))]

    return _SLOT.sub(fill, pattern)


def build_world(
    settings: SyntheticWorldConfig,
    seed: int,
    template: str,
    init_text: str = "",
) -> SyntheticWorld:
    """Builds the world: descriptions and images from seed, encoder from
    the encoder seed."""
    rng = np.random.default_rng(seed)
    classes = tuple(
        ClassRecord(
            class_id=index,
            name=class_name(index),
            split=(
                ClassSplit.BASE
                if index < settings.base_classes
                else ClassSplit.NOVEL
            ),
        )
        for index in range(settings.classes)
    )
    outputs = {
        record.class_id: [
            describe(
                record.name,
                distinct_words(record.class_id, settings.distinct_words),
                rng,
            )
            for _ in range(settings.descriptions_per_class)
        ]
        for record in classes
    }
    inputs = build_inputs(classes, template)
    dataset = assemble_dataset(
        classes,
        inputs,
        outputs,
        PairSource.SYNTHETIC,
        meta={"M": settings.descriptions_per_class, "N": 1},
    )

    texts = [text for texts in outputs.values() for text in texts]
    texts.extend(inputs.values())
    texts.append(init_text)
    vocab = Vocabulary.from_texts(texts)
    encoder_config = EncoderConfig(
        vocab_size=vocab.size, **settings.encoder
    )
    weights = init_weights(encoder_config, settings.encoder_seed)
    encoder = TextEncoder(vocab, weights)

    centers = build_head_ensemble(dataset, encoder).class_features
    images = synthesize_image_features(
        centers,
        settings.images_per_class,
        settings.sigma,
        rng,
        class_names=[record.name for record in classes],
    )
    logger.info(
        "Built a world of %d classes, %d pairs and %d images.",
        len(classes),
        len(dataset),
        images.n,
    )
    return SyntheticWorld(encoder, classes, dataset, images, template)


def evaluate_transfer(
    world: SyntheticWorld,
    make_head: Callable[[list[ClassRecord]], ClassifierHead],
    tag: str | None = None,
) -> TransferReport:
    """Evaluates a head on base and novel classes, each in its own label
    space."""
    reports = {}
    for which in (ClassSplit.BASE, ClassSplit.NOVEL):
        classes = world.split_classes(which)
        head = make_head(classes)
        reports[which] = evaluate(
            world.images.restrict(head.class_names), head, tag=tag
        )
    return TransferReport(reports[ClassSplit.BASE], reports[ClassSplit.NOVEL])
