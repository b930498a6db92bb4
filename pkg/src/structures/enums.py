"""
All enums used in the project.
"""

from __future__ import annotations

from enum import Enum, auto
from typing import TYPE_CHECKING

from .errors import ValidationError

if TYPE_CHECKING:
    from typing import Self


class Choice(Enum):
    """An enum whose members are written as lowercase, hyphenated labels."""

    @property
    def label(self) -> str:
        """Gets the label used in config files, artifacts and the CLI."""
        return self.name.lower().replace("_", "-")

    @classmethod
    def labels(cls) -> list[str]:
        """Gets the labels of every member."""
        return [member.label for member in cls]

    @classmethod
    def parse(cls, text: str | Self) -> Self:
        """Parses a label (or member name) into a member."""
        if isinstance(text, cls):
            return text
        key = str(text).strip().upper().replace("-", "_")
        try:
            return cls[key]
        except KeyError:
            raise ValidationError(
                f"Unknown {cls.__name__} '{text}'; "
                f"expected one of {', '.join(cls.labels())}."
            ) from None


class ExecutionMode(Choice):
    """The available subcommands of the command line tool."""

    CURATE = auto()
    TRAIN = auto()
    EVAL = auto()
    ABLATE = auto()
    INSPECT = auto()
    SYNTHETIC = auto()


class ClassSplit(Choice):
    """Which side of a base-to-novel partition a class belongs to."""

    BASE = auto()
    NOVEL = auto()
    ALL = auto()


class PairSource(Choice):
    """Where the output text of a prompt pair came from."""

    LLM = auto()
    HANDCRAFTED_80 = auto()
    HANDCRAFTED_ATTRIBUTE = auto()
    FIXTURE = auto()
    SYNTHETIC = auto()


class CurationMode(Choice):
    """How the curate command produces output texts."""

    LLM = auto()
    FIXTURE = auto()
    HANDCRAFTED_80 = auto()
    HANDCRAFTED_ATTRIBUTE = auto()

    @property
    def source(self) -> PairSource:
        """Gets the pair source recorded for this mode."""
        return PairSource[self.name]


class ActivationKind(Choice):
    """The MLP nonlinearity of the text encoder."""

    GELU_TANH = auto()
    QUICK_GELU = auto()


class ScheduleKind(Choice):
    """The learning rate shape after warmup."""

    CONSTANT = auto()
    COSINE = auto()


class LossKind(Choice):
    """The mapping objectives available to the trainer."""

    MSE = auto()
    L1 = auto()
    CONTRASTIVE = auto()


class TargetMode(Choice):
    """Whether each input maps to one description or the class average."""

    PER_SAMPLE = auto()
    ENSEMBLED = auto()


class TrainMethod(Choice):
    """What gets trained against the mapping objective."""

    PROMPTS = auto()
    LINEAR_ADAPTER = auto()
    MLP_ADAPTER = auto()


class AdapterKind(Choice):
    """The adapter architectures attached to the encoder output."""

    LINEAR = auto()
    MLP = auto()


class HeadProvenance(Choice):
    """How the class features of a classifier head were produced."""

    PROMPTED = auto()
    ENSEMBLED = auto()
    PLAIN_TEMPLATE = auto()
    ADAPTER = auto()


class ArtifactItem(Enum):
    """The artifacts written into a run directory."""

    VOCABULARY = auto()
    WEIGHTS = auto()
    DATASET = auto()
    CHECKPOINT = auto()
    ADAPTER = auto()
    FEATURES = auto()
    LOSS_TRACE = auto()
    REPORT = auto()
    REPORT_TABLE = auto()
    SWEEP = auto()
    SWEEP_TABLE = auto()
    NEAREST_WORDS = auto()
    MANIFEST = auto()
    RUN_LOG = auto()

    @property
    def filename(self) -> str:
        """Gets the filename for the artifact."""
        match self:
            case ArtifactItem.VOCABULARY:
                return "vocab.json"
            case ArtifactItem.WEIGHTS:
                return "weights.json"
            case ArtifactItem.DATASET:
                return "dataset.jsonl"
            case ArtifactItem.CHECKPOINT:
                return "checkpoint.json"
            case ArtifactItem.ADAPTER:
                return "adapter.json"
            case ArtifactItem.FEATURES:
                return "features.json"
            case ArtifactItem.LOSS_TRACE:
                return "loss_trace.csv"
            case ArtifactItem.REPORT:
                return "report.json"
            case ArtifactItem.REPORT_TABLE:
                return "report.txt"
            case ArtifactItem.SWEEP:
                return "sweep.csv"
            case ArtifactItem.SWEEP_TABLE:
                return "sweep.txt"
            case ArtifactItem.NEAREST_WORDS:
                return "nearest_words.txt"
            case ArtifactItem.MANIFEST:
                return "manifest.json"
            case ArtifactItem.RUN_LOG:
                return "run_log.json"
