"""
The records that make up a text-to-text prompt dataset.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import TYPE_CHECKING, Any

from ..structures.enums import ClassSplit, PairSource
from ..structures.errors import ArtifactIOError, ValidationError
from ..utilities import read_json

if TYPE_CHECKING:
    from typing import Iterable, Self

PLACEHOLDER = "{CLS}"


@dataclass(frozen=True)
class ClassRecord:
    """A class name, its optional concept suffix and its split."""

    class_id: int
    name: str
    concept_suffix: str | None = None
    split: ClassSplit = ClassSplit.ALL

    def __post_init__(self) -> None:
        object.__setattr__(self, "split", ClassSplit.parse(self.split))
        if not self.name.strip():
            raise ValidationError(f"Class {self.class_id} has an empty name.")

    def to_dict(self) -> dict[str, Any]:
        """Converts the record into JSON values."""
        return {
            "class_id": self.class_id,
            "name": self.name,
            "concept_suffix": self.concept_suffix,
            "split": self.split.label,
        }

    @classmethod
    def from_dict(cls, values: dict[str, Any]) -> Self:
        """Creates a record from JSON values."""
        try:
            return cls(
                class_id=int(values["class_id"]),
                name=str(values["name"]),
                concept_suffix=values.get("concept_suffix"),
                split=values.get("split", ClassSplit.ALL),
            )
        except KeyError as error:
            raise ValidationError(f"Class record lacks {error}.") from error


@dataclass(frozen=True)
class QueryTemplate:
    """A text with exactly one {CLS} placeholder."""

    template: str
    query_id: int = 0

    def __post_init__(self) -> None:
        count = self.template.count(PLACEHOLDER)
        if count != 1:
            raise ValidationError(
                f"Template '{self.template}' must contain exactly one "
                f"{PLACEHOLDER} placeholder, found {count}."
            )

    def render(self, name: str) -> str:
        """Substitutes a class name for the placeholder."""
        return self.template.replace(PLACEHOLDER, name)


@dataclass(frozen=True)
class PromptPair:
    """One class-name input paired with one description output."""

    class_id: int
    input_text: str
    output_text: str
    source: PairSource

    def __post_init__(self) -> None:
        object.__setattr__(self, "source", PairSource.parse(self.source))
        if not self.output_text.strip():
            raise ValidationError(
                f"Pair of class {self.class_id} has an empty output."
            )


@dataclass(frozen=True)
class PromptDataset:
    """Prompt pairs plus the classes they refer to.

    The meta dictionary records how the pairs were produced: M outputs per
    query and N queries for generated data, K templates for handcrafted
    data, the generator tag and any filtering that changed the count.
    """

    pairs: tuple[PromptPair, ...]
    classes: tuple[ClassRecord, ...]
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "pairs", tuple(self.pairs))
        object.__setattr__(self, "classes", tuple(self.classes))
        self.validate()

    def validate(self) -> None:
        """Checks every dataset invariant."""
        names = [record.name for record in self.classes]
        if len(set(names)) != len(names):
            duplicates = sorted({n for n in names if names.count(n) > 1})
            raise ValidationError(
                f"Duplicate class names: {', '.join(duplicates)}."
            )
        ids = [record.class_id for record in self.classes]
        if len(set(ids)) != len(ids):
            raise ValidationError("Duplicate class ids.")
        inputs: dict[int, str] = {}
        for pair in self.pairs:
            if pair.class_id not in ids:
                raise ValidationError(
                    f"Pair refers to unknown class {pair.class_id}."
                )
            expected = inputs.setdefault(pair.class_id, pair.input_text)
            if pair.input_text != expected:
                raise ValidationError(
                    f"Class {pair.class_id} has more than one input text."
                )
        expected_count = self.expected_pair_count()
        if expected_count is not None and expected_count != len(self.pairs):
            raise ValidationError(
                f"Dataset holds {len(self.pairs)} pairs, but its meta "
                f"implies {expected_count}."
            )

    def expected_pair_count(self) -> int | None:
        """Gets M * N * C or K * C, or None once the pairs were filtered."""
        meta = self.meta
        if meta.get("filtered") or meta.get("limit") is not None:
            return None
        count = len(self.classes)
        if "K" in meta:
            return int(meta["K"]) * count
        if "M" in meta and "N" in meta:
            return int(meta["M"]) * int(meta["N"]) * count
        return None

    def __len__(self) -> int:
        return len(self.pairs)

    @property
    def class_by_id(self) -> dict[int, ClassRecord]:
        """Gets the classes keyed by id."""
        return {record.class_id: record for record in self.classes}

    def inputs_by_class(self) -> dict[int, str]:
        """Gets the single input text of every class that has pairs."""
        return {pair.class_id: pair.input_text for pair in self.pairs}

    def outputs_by_class(self) -> dict[int, list[str]]:
        """Gets the output texts of every class, in pair order."""
        outputs: dict[int, list[str]] = {
            record.class_id: [] for record in self.classes
        }
        for pair in self.pairs:
            outputs[pair.class_id].append(pair.output_text)
        return outputs

    def subset(self, class_ids: Iterable[int]) -> PromptDataset:
        """Keeps only the given classes and their pairs."""
        keep = set(class_ids)
        unknown = keep - set(self.class_by_id)
        if unknown:
            raise ValidationError(f"Unknown class ids {sorted(unknown)}.")
        return replace(
            self,
            pairs=tuple(p for p in self.pairs if p.class_id in keep),
            classes=tuple(c for c in self.classes if c.class_id in keep),
        )

    def split(self, which: ClassSplit) -> PromptDataset:
        """Keeps the classes of one side of the base-to-novel split."""
        if which == ClassSplit.ALL:
            return self
        return self.subset(
            c.class_id for c in self.classes if c.split == which
        )

    def limit_outputs(self, k: int) -> PromptDataset:
        """Keeps the first k outputs of every class."""
        if k < 1:
            raise ValidationError("Output limit must be at least 1.")
        seen: dict[int, int] = {}
        pairs = []
        for pair in self.pairs:
            seen[pair.class_id] = seen.get(pair.class_id, 0) + 1
            if seen[pair.class_id] <= k:
                pairs.append(pair)
        meta = dict(self.meta)
        meta["limit"] = k
        return replace(self, pairs=tuple(pairs), meta=meta)


def load_classes(path: str | Path) -> list[ClassRecord]:
    """Reads a class list.

    The file holds either a list or an object with a "classes" list. Each
    entry is a class name or an object with name, and optionally class_id,
    concept_suffix and split. Missing ids default to the list position.
    """
    try:
        data = read_json(path)
    except FileNotFoundError as error:
        raise ArtifactIOError(f"Class list '{path}' not found.") from error
    except json.JSONDecodeError as error:
        raise ArtifactIOError(
            f"Class list '{path}' is not valid JSON: {error}"
        ) from error
    if isinstance(data, dict):
        data = data.get("classes")
    if not isinstance(data, list):
        raise ValidationError(f"Class list '{path}' must hold a list.")
    records = []
    for index, entry in enumerate(data):
        if isinstance(entry, str):
            entry = {"name": entry}
        if not isinstance(entry, dict):
            raise ValidationError(f"Class entry {index} is malformed.")
        records.append(ClassRecord.from_dict({"class_id": index, **entry}))
    names = [record.name for record in records]
    if len(set(names)) != len(names):
        raise ValidationError(f"Class list '{path}' repeats a class name.")
    return records
