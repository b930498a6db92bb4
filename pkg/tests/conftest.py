"""
Shared toy encoders and datasets.
"""

import pytest

from src.data.curation import assemble_dataset
from src.data.records import ClassRecord
from src.encoder.model import TextEncoder
from src.encoder.vocabulary import Vocabulary
from src.encoder.weights import EncoderConfig, init_weights
from src.structures.enums import PairSource

TOY_TEXTS = [
    "a photo of a cat",
    "a photo of a dog",
    "a photo of a bird",
    "a small cat with long whiskers and soft fur",
    "a cat sleeping on a warm sofa",
    "a loyal dog that barks at strangers",
    "a dog with floppy ears chasing a ball",
    "a bird with bright feathers on a branch",
    "a small bird singing in the morning",
]

TOY_OUTPUTS = {
    0: [
        "a small cat with long whiskers and soft fur",
        "a cat sleeping on a warm sofa",
    ],
    1: [
        "a loyal dog that barks at strangers",
        "a dog with floppy ears chasing a ball",
    ],
    2: [
        "a bird with bright feathers on a branch",
        "a small bird singing in the morning",
    ],
}


@pytest.fixture
def toy_vocab() -> Vocabulary:
    """A vocabulary covering every toy text."""
    return Vocabulary.from_texts(TOY_TEXTS)


@pytest.fixture
def make_encoder(toy_vocab):
    """Creates seeded toy encoders over the toy vocabulary."""

    def factory(
        num_layers: int = 2,
        d_model: int = 16,
        projection_dim: int = 8,
        num_heads: int = 2,
        context_length: int = 16,
        seed: int = 0,
        vocab: Vocabulary | None = None,
    ) -> TextEncoder:
        vocab = vocab or toy_vocab
        config = EncoderConfig(
            vocab_size=vocab.size,
            num_layers=num_layers,
            d_model=d_model,
            num_heads=num_heads,
            mlp_ratio=2.0,
            context_length=context_length,
            projection_dim=projection_dim,
        )
        return TextEncoder(vocab, init_weights(config, seed))

    return factory


@pytest.fixture
def toy_encoder(make_encoder) -> TextEncoder:
    """A two-layer toy encoder."""
    return make_encoder()


@pytest.fixture
def toy_classes() -> list[ClassRecord]:
    """Three toy classes."""
    return [
        ClassRecord(class_id=0, name="cat"),
        ClassRecord(class_id=1, name="dog"),
        ClassRecord(class_id=2, name="bird"),
    ]


@pytest.fixture
def toy_dataset(toy_classes):
    """Two descriptions for each toy class."""
    inputs = {r.class_id: f"a photo of a {r.name}" for r in toy_classes}
    return assemble_dataset(
        toy_classes,
        inputs,
        TOY_OUTPUTS,
        PairSource.LLM,
        meta={"M": 2, "N": 1},
    )
