"""
The word-level vocabulary and tokenizer of the text encoder.

Text is lowercased, whitespace is collapsed and the result is split into
runs of word characters and single punctuation marks. Each token maps to
its vocabulary id, or to the unknown token when it is missing.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING

from ..structures.errors import (
    ArtifactIOError,
    CapacityOverflowError,
    ValidationError,
)
from ..utilities import read_json, write_json

if TYPE_CHECKING:
    from typing import Iterable, Self

logger = logging.getLogger(__name__)

SOS_TOKEN = "<|startoftext|>"
EOS_TOKEN = "<|endoftext|>"
PAD_TOKEN = "<|pad|>"
UNK_TOKEN = "<|unk|>"

_WORD_PATTERN = re.compile(r"\w+|[^\w\s]")
_SPACE_PATTERN = re.compile(r"\s+")


def normalize_text(text: str) -> str:
    """Lowercases text and collapses runs of whitespace."""
    return _SPACE_PATTERN.sub(" ", text.lower()).strip()


def split_words(text: str) -> list[str]:
    """Splits normalized text on whitespace and punctuation."""
    return _WORD_PATTERN.findall(normalize_text(text))


@dataclass(frozen=True)
class Vocabulary:
    """An ordered token list with the ids of the special tokens."""

    tokens: tuple[str, ...]
    sos_id: int
    eos_id: int
    pad_id: int
    unk_id: int
    version: str = "1"
    _index: dict[str, int] = field(
        default_factory=dict, init=False, repr=False, compare=False
    )

    def __post_init__(self) -> None:
        """Validates the token list and builds the lookup index."""
        object.__setattr__(self, "tokens", tuple(self.tokens))
        specials = (self.sos_id, self.eos_id, self.pad_id, self.unk_id)
        if len(set(specials)) != len(specials):
            raise ValidationError("Special token ids must be distinct.")
        if any(not 0 <= index < len(self.tokens) for index in specials):
            raise ValidationError("Special token ids must be < vocab size.")
        index = {}
        for position, token in enumerate(self.tokens):
            if token in index:
                raise ValidationError(f"Duplicate vocabulary token '{token}'.")
            index[token] = position
        object.__setattr__(self, "_index", index)

    @property
    def size(self) -> int:
        """Gets the number of tokens."""
        return len(self.tokens)

    def id_of(self, word: str) -> int:
        """Gets the id of a word, or the unknown id."""
        return self._index.get(word, self.unk_id)

    def __contains__(self, word: str) -> bool:
        return word in self._index

    @classmethod
    def from_texts(cls, texts: Iterable[str], version: str = "1") -> Self:
        """Builds a vocabulary of every word in the texts plus specials."""
        words = sorted({word for text in texts for word in split_words(text)})
        specials = [SOS_TOKEN, EOS_TOKEN, PAD_TOKEN, UNK_TOKEN]
        words = [word for word in words if word not in specials]
        start = len(words)
        return cls(
            tokens=tuple(words + specials),
            sos_id=start,
            eos_id=start + 1,
            pad_id=start + 2,
            unk_id=start + 3,
            version=version,
        )

    def to_dict(self) -> dict:
        """Converts the vocabulary into the vocabulary file layout."""
        return {
            "version": self.version,
            "tokens": list(self.tokens),
            "sos": self.sos_id,
            "eos": self.eos_id,
            "pad": self.pad_id,
            "unk": self.unk_id,
        }

    def save(self, path: str | Path) -> Path:
        """Writes the vocabulary file."""
        path = Path(path)
        write_json(path, self.to_dict())
        return path

    @classmethod
    def load(cls, path: str | Path) -> Self:
        """Reads and validates a vocabulary file."""
        try:
            data = read_json(path)
        except FileNotFoundError as error:
            raise ArtifactIOError(f"Vocabulary '{path}' not found.") from error
        except json.JSONDecodeError as error:
            raise ArtifactIOError(
                f"Vocabulary '{path}' is not valid JSON: {error}"
            ) from error
        missing = {"tokens", "sos", "eos", "pad", "unk"} - set(data)
        if missing:
            raise ValidationError(
                f"Vocabulary '{path}' lacks {', '.join(sorted(missing))}."
            )
        return cls(
            tokens=tuple(data["tokens"]),
            sos_id=int(data["sos"]),
            eos_id=int(data["eos"]),
            pad_id=int(data["pad"]),
            unk_id=int(data["unk"]),
            version=str(data.get("version", "1")),
        )


@dataclass(frozen=True)
class TokenSequence:
    """A fixed-length id sequence: SOS, words, EOS, then padding."""

    ids: tuple[int, ...]
    eos_position: int
    source_text: str
    truncated: bool = False

    def __len__(self) -> int:
        return len(self.ids)


def tokenize(
    text: str,
    vocab: Vocabulary,
    context_length: int,
) -> TokenSequence:
    """Converts text into a padded sequence of exactly context_length ids.

    Texts with more than context_length - 2 words are cut from the right;
    the EOS token is always present.
    """
    words = split_words(text)
    if not words:
        raise ValidationError("Cannot tokenize empty text.")
    capacity = context_length - 2
    if capacity < 1:
        raise CapacityOverflowError(
            f"Context length {context_length} leaves no room for words."
        )
    truncated = len(words) > capacity
    if truncated:
        logger.debug(
            "Truncated '%s...' from %d to %d words.",
            text[:40],
            len(words),
            capacity,
        )
        words = words[:capacity]
    ids = [vocab.sos_id] + [vocab.id_of(word) for word in words]
    ids.append(vocab.eos_id)
    eos_position = len(ids) - 1
    ids.extend([vocab.pad_id] * (context_length - len(ids)))
    return TokenSequence(
        ids=tuple(ids),
        eos_position=eos_position,
        source_text=text,
        truncated=truncated,
    )
