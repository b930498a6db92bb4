"""
Handles the project configuration, including reading the relevant files.
"""

from __future__ import annotations

import copy
import datetime as dt
import os
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import TYPE_CHECKING

from .structures.enums import (
    CurationMode,
    ExecutionMode,
    HeadProvenance,
    LossKind,
    ScheduleKind,
    TargetMode,
    TrainMethod,
)
from .structures.errors import ValidationError
from .utilities import deep_merge, read_json, to_path

if TYPE_CHECKING:
    from typing import Any, Self

_MISSING = object()


def _first_variable(names: tuple[str, ...]) -> str | None:
    """Gets the first environment variable of names that is set."""
    for name in names:
        value = os.environ.get(name)
        if value:
            return value
    return None


class Config:
    """Handles the project configuration.

    Defaults are stored in the config.json file of the cfg directory at the
    project root. A user config file can be layered on top of it, and
    command line overrides are applied last, so a flag always wins over a
    file and a file always wins over the defaults.

    Secrets are never read from files: the LLM endpoint and key come from
    the PROTEXT_LLM_URL and PROTEXT_LLM_KEY environment variables, with
    TEXTPROMPTS_LLM_URL and TEXTPROMPTS_LLM_KEY read when those are unset.
    """

    CONFIG_FILENAME: str = "config.json"
    DEFAULT_DIRECTORY: Path = Path(__file__).resolve().parents[1] / "cfg"
    LLM_URL_VARIABLES: tuple[str, ...] = (
        "PROTEXT_LLM_URL",
        "TEXTPROMPTS_LLM_URL",
    )
    LLM_KEY_VARIABLES: tuple[str, ...] = (
        "PROTEXT_LLM_KEY",
        "TEXTPROMPTS_LLM_KEY",
    )

    CREATED = dt.datetime.now(dt.timezone.utc)

    def __init__(
        self,
        config_file: str | Path | None = None,
        overrides: list[tuple[list[str], Any]] | None = None,
        config_directory: str | Path | None = None,
    ) -> None:
        """Initializes the configuration object."""
        self.config_directory: Path = to_path(
            config_directory, str(self.DEFAULT_DIRECTORY)
        )
        self.config_file: Path | None = to_path(config_file)
        self.overrides = list(overrides or [])
        self.refresh()

    def refresh(self) -> None:
        """Reloads the defaults, the user file and the overrides."""
        config = read_json(self.get_config_path())
        if self.config_file is not None:
            if not self.config_file.exists():
                raise ValidationError(
                    f"Config file '{self.config_file}' not found."
                )
            user = read_json(self.config_file)
            if not isinstance(user, dict):
                raise ValidationError(
                    f"Config file '{self.config_file}' must hold an object."
                )
            config = deep_merge(config, user)
        self.config = config
        for keys, value in self.overrides:
            self.set(keys, value)

    def get(self, *keys: str, default: Any = _MISSING) -> Any:
        """Gets a value from the configuration dictionary.

        Multiple keys can be provided to access nested values.
        """
        value = self.config
        for key in keys:
            if not isinstance(value, dict) or key not in value:
                if default is not _MISSING:
                    return default
                raise ValidationError(
                    f"Config key '{'.'.join(keys)}' is not set."
                )
            value = value[key]
        return value

    def set(self, keys: list[str], value: Any) -> None:
        """Sets a nested value, creating intermediate sections."""
        section = self.config
        for key in keys[:-1]:
            section = section.setdefault(key, {})
            if not isinstance(section, dict):
                raise ValidationError(
                    f"Config key '{key}' is not a section."
                )
        section[keys[-1]] = value

    def snapshot(self) -> dict:
        """Gets a deep copy of the merged configuration."""
        return copy.deepcopy(self.config)

    def get_config_path(
        self,
        filename: str | None = None,
        check_exists: bool = True,
    ) -> Path:
        """Gets the path to a file in the config directory."""
        filename = filename if filename is not None else self.CONFIG_FILENAME
        path = self.config_directory / filename
        if check_exists and not path.exists():
            raise ValidationError(f"Config file '{filename}' not found.")
        return path

    def get_path(
        self,
        key: str,
        check_exists: bool = True,
        required: bool = True,
    ) -> Path | None:
        """Gets a path from the paths section of the configuration."""
        value = self.get("paths", key, default=None)
        if value is None:
            if required:
                raise ValidationError(
                    f"No {key} path configured; pass --{key} or set "
                    f"paths.{key}."
                )
            return None
        path = Path(value)
        if check_exists and not path.exists():
            raise ValidationError(f"The {key} path '{path}' does not exist.")
        return path

    def get_paths(self, key: str, check_exists: bool = True) -> list[Path]:
        """Gets a path setting that may hold one path or a list of them."""
        value = self.get("paths", key, default=None)
        if not isinstance(value, list):
            return [self.get_path(key, check_exists=check_exists)]
        if not value:
            raise ValidationError(f"The {key} path list is empty.")
        paths = [Path(item) for item in value]
        for path in paths:
            if check_exists and not path.exists():
                raise ValidationError(
                    f"The {key} path '{path}' does not exist."
                )
        return paths

    @property
    def llm_url(self) -> str | None:
        """Gets the LLM completion endpoint from the environment."""
        return _first_variable(self.LLM_URL_VARIABLES)

    @property
    def llm_key(self) -> str | None:
        """Gets the LLM API key from the environment."""
        return _first_variable(self.LLM_KEY_VARIABLES)

    def __getitem__(self, key: str) -> Any:
        """Gets a value from the configuration dictionary."""
        return self.config[key]


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters of a prompt (or adapter) training run."""

    prompt_length: int = 4
    prompt_depth: int = 9
    epochs: int = 10
    warmup_epochs: int = 5
    batch_size: int = 32
    lr: float = 0.03
    schedule: ScheduleKind = ScheduleKind.COSINE
    loss: LossKind = LossKind.MSE
    target: TargetMode = TargetMode.PER_SAMPLE
    method: TrainMethod = TrainMethod.PROMPTS
    seed: int = 1
    temperature: float = 0.07
    weight_decay: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    normalize_features: bool = True
    init_text: str = "a photo of a"
    prompt_init_std: float = 0.02
    adapter_ratio: float = 0.2
    adapter_reduction: int = 4

    @classmethod
    def from_dict(cls, values: dict, seed: int | None = None) -> Self:
        """Creates a train config from a config section."""
        known = {name for name in cls.__dataclass_fields__}
        unknown = set(values) - known
        if unknown:
            raise ValidationError(
                f"Unknown train settings: {', '.join(sorted(unknown))}."
            )
        values = dict(values)
        if seed is not None:
            values["seed"] = seed
        for name, kind in (
            ("schedule", ScheduleKind),
            ("loss", LossKind),
            ("target", TargetMode),
            ("method", TrainMethod),
        ):
            if name in values:
                values[name] = kind.parse(values[name])
        return cls(**values).validate()

    @classmethod
    def from_config(cls, config: Config, section: str = "train") -> Self:
        """Creates a train config from the merged configuration."""
        values = config.get("train", default={})
        if section != "train":
            values = deep_merge(values, config.get(*section.split(".")))
        return cls.from_dict(values, seed=config.get("seed"))

    def validate(self) -> Self:
        """Checks that every setting is in range."""
        if self.prompt_length < 0:
            raise ValidationError("prompt_length must be non-negative.")
        if self.prompt_depth < 1:
            raise ValidationError("prompt_depth must be at least 1.")
        if self.epochs < 0 or self.warmup_epochs < 0:
            raise ValidationError("epochs and warmup_epochs must be >= 0.")
        if self.batch_size < 1:
            raise ValidationError("batch_size must be positive.")
        if self.lr <= 0 or self.temperature <= 0:
            raise ValidationError("lr and temperature must be positive.")
        if self.weight_decay < 0 or self.eps < 0:
            raise ValidationError("weight_decay and eps must be >= 0.")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValidationError("betas must lie in [0, 1).")
        if not 0 <= self.adapter_ratio <= 1:
            raise ValidationError("adapter_ratio must lie in [0, 1].")
        if self.adapter_reduction < 1:
            raise ValidationError("adapter_reduction must be positive.")
        return self

    def with_depth_limit(self, num_layers: int) -> Self:
        """Clamps the prompt depth to the number of encoder layers."""
        return replace(self, prompt_depth=min(self.prompt_depth, num_layers))

    def to_dict(self) -> dict:
        """Converts the config into JSON-friendly values."""
        values = asdict(self)
        for name in ("schedule", "loss", "target", "method"):
            values[name] = getattr(self, name).label
        return values


@dataclass(frozen=True)
class EvalConfig:
    """Settings for building classifier heads and classifying."""

    temperature: float = 100.0
    head: HeadProvenance = HeadProvenance.PROMPTED
    template: str = "a photo of a {CLS}"
    tag: str | None = None

    @classmethod
    def from_config(cls, config: Config) -> Self:
        """Creates an eval config from the merged configuration."""
        values = dict(config.get("eval", default={}))
        if "head" in values:
            values["head"] = HeadProvenance.parse(values["head"])
        config = cls(**values)
        if config.temperature <= 0:
            raise ValidationError("eval.temperature must be positive.")
        return config


@dataclass(frozen=True)
class CurateConfig:
    """Settings for curating a text-to-text dataset."""

    mode: CurationMode = CurationMode.FIXTURE
    outputs_per_query: int = 10
    input_template: str = "a photo of a {CLS}"
    queries: list[str] | None = None
    max_tokens: int = 77
    temperature: float = 0.99
    timeout: float = 30
    retries: int = 3
    backoff: float = 1.0
    workers: int = 4

    @classmethod
    def from_config(cls, config: Config) -> Self:
        """Creates a curate config from the merged configuration."""
        values = dict(config.get("curate", default={}))
        if "mode" in values:
            values["mode"] = CurationMode.parse(values["mode"])
        config = cls(**values)
        if config.outputs_per_query < 1:
            raise ValidationError("curate.outputs_per_query must be >= 1.")
        if config.retries < 0 or config.workers < 1:
            raise ValidationError("curate.retries/workers out of range.")
        return config


@dataclass(frozen=True)
class SyntheticWorldConfig:
    """Shape of the seeded desk-scale world used for transfer experiments."""

    classes: int = 20
    base_classes: int = 10
    novel_classes: int = 10
    descriptions_per_class: int = 20
    sigma: float = 0.3
    encoder_seed: int = 0
    images_per_class: int = 50
    distinct_words: int = 3
    encoder: dict = field(default_factory=dict)
    train: dict = field(default_factory=dict)

    @classmethod
    def from_config(cls, config: Config) -> Self:
        """Creates a synthetic world config from the merged configuration."""
        return cls(**config.get("synthetic", default={})).validate()

    def validate(self) -> Self:
        """Checks that the world is well formed."""
        if self.classes < 2:
            raise ValidationError("A synthetic world needs >= 2 classes.")
        if self.base_classes + self.novel_classes != self.classes:
            raise ValidationError(
                "synthetic.base_classes + synthetic.novel_classes must equal "
                "synthetic.classes."
            )
        if self.base_classes < 1:
            raise ValidationError("A synthetic world needs base classes.")
        if self.sigma < 0:
            raise ValidationError("synthetic.sigma must be non-negative.")
        if self.descriptions_per_class < 1 or self.images_per_class < 1:
            raise ValidationError(
                "synthetic descriptions and images per class must be >= 1."
            )
        return self


@dataclass(frozen=True)
class RunConfig:
    """Where a command reads from and writes to, plus its provenance."""

    mode: ExecutionMode
    output_directory: Path
    run_id: str
    seed: int
    train: TrainConfig
    evaluation: EvalConfig

    @classmethod
    def from_config(cls, config: Config, mode: ExecutionMode) -> Self:
        """Creates a run config, defaulting the run id to the start time."""
        run_id = config.get("run_id", default=None)
        if run_id is None:
            created = Config.CREATED.strftime(r"%Y%m%dT%H%M%S")
            run_id = f"{mode.label}_{created}"
        return cls(
            mode=mode,
            output_directory=Path(config.get("paths", "output")),
            run_id=str(run_id),
            seed=int(config.get("seed")),
            train=TrainConfig.from_config(config),
            evaluation=EvalConfig.from_config(config),
        )

    @property
    def run_directory(self) -> Path:
        """Gets the directory holding this run's artifacts."""
        return self.output_directory / self.run_id

    def prepare(self) -> Path:
        """Creates the run directory, refusing to reuse a run id."""
        directory = self.run_directory
        if directory.exists():
            raise ValidationError(
                f"Run '{self.run_id}' already exists in "
                f"'{self.output_directory}'; choose another --run-id."
            )
        directory.mkdir(parents=True)
        return directory
