"""
Precomputed image features: validation, persistence and a seeded
synthetic generator.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np

from ..numerics.arrays import normalize_rows
from ..storage.helper import read_archive, write_archive
from ..structures.errors import ArtifactIOError, ValidationError

if TYPE_CHECKING:
    from typing import Sequence

FEATURES_FORMAT = "textprompts-image-features"
NORM_TOLERANCE = 1e-6


@dataclass(frozen=True)
class ImageFeatureSet:
    """N labelled d-dimensional image features."""

    features: np.ndarray
    labels: np.ndarray
    class_names: tuple[str, ...]
    normalized: bool = True

    def __post_init__(self) -> None:
        features = np.array(self.features, dtype=np.float64)
        labels = np.array(self.labels, dtype=np.int64)
        if features.ndim != 2:
            raise ValidationError(
                f"Image features must be [N, d], got {features.shape}."
            )
        if labels.shape != (features.shape[0],):
            raise ValidationError("Need exactly one label per feature row.")
        names = tuple(self.class_names)
        if labels.size and (labels.min() < 0 or labels.max() >= len(names)):
            raise ValidationError("Image label out of class range.")
        if not np.all(np.isfinite(features)):
            raise ValidationError("Image features hold non-finite values.")
        if self.normalized and features.size:
            norms = np.linalg.norm(features, axis=1)
            if np.any(np.abs(norms - 1.0) > NORM_TOLERANCE):
                raise ValidationError(
                    "Image features flagged normalized are not unit rows."
                )
        features.flags.writeable = False
        labels.flags.writeable = False
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "class_names", names)

    @property
    def n(self) -> int:
        """Gets the number of images."""
        return self.features.shape[0]

    @property
    def d(self) -> int:
        """Gets the feature width."""
        return self.features.shape[1]

    def restrict(self, class_names: Sequence[str]) -> ImageFeatureSet:
        """Keeps the images of some classes, relabeled to their order."""
        positions = {name: i for i, name in enumerate(self.class_names)}
        missing = [name for name in class_names if name not in positions]
        if missing:
            raise ValidationError(f"Unknown classes {missing}.")
        mapping = np.full(len(self.class_names), -1)
        for index, name in enumerate(class_names):
            mapping[positions[name]] = index
        keep = mapping[self.labels] >= 0
        return ImageFeatureSet(
            features=self.features[keep],
            labels=mapping[self.labels][keep],
            class_names=tuple(class_names),
            normalized=self.normalized,
        )


def synthesize_image_features(
    class_features: np.ndarray,
    per_class: int,
    sigma: float,
    rng: np.random.Generator,
    class_names: Sequence[str] | None = None,
) -> ImageFeatureSet:
    """Draws noisy unit copies of each class feature.

    Each image is normalize(class feature + noise) with isotropic Gaussian
    noise whose expected squared norm is sigma^2.
    """
    if sigma < 0:
        raise ValidationError("sigma must be non-negative.")
    centers = normalize_rows(class_features)
    count, dim = centers.shape
    noise = rng.normal(0.0, sigma / np.sqrt(dim), (count, per_class, dim))
    rows = (centers[:, None, :] + noise).reshape(count * per_class, dim)
    names = class_names or [f"class_{i}" for i in range(count)]
    return ImageFeatureSet(
        features=normalize_rows(rows),
        labels=np.repeat(np.arange(count), per_class),
        class_names=tuple(names),
    )


def save_features(images: ImageFeatureSet, path: str | Path) -> list[Path]:
    """Writes features as a tensor archive, or JSONL for a .jsonl path."""
    path = Path(path)
    if path.suffix == ".jsonl":
        return [_save_jsonl(images, path)]
    header = {
        "format": FEATURES_FORMAT,
        "d": images.d,
        "n": images.n,
        "class_names": list(images.class_names),
        "normalized": images.normalized,
    }
    tensors = {
        "features": images.features,
        "labels": images.labels.astype(np.float64),
    }
    return write_archive(path, header, tensors)


def load_features(path: str | Path) -> ImageFeatureSet:
    """Reads features written by save_features."""
    path = Path(path)
    if path.suffix == ".jsonl":
        return _load_jsonl(path)
    header, tensors = read_archive(path)
    try:
        features = tensors["features"]
        labels = tensors["labels"]
        names = header["class_names"]
    except KeyError as error:
        raise ArtifactIOError(f"Features '{path}' lack {error}.") from error
    if features.shape != (header.get("n"), header.get("d")):
        raise ArtifactIOError(f"Features '{path}' disagree with n and d.")
    if not np.array_equal(labels, np.round(labels)):
        raise ArtifactIOError(f"Features '{path}' hold non-integer labels.")
    return ImageFeatureSet(
        features=features,
        labels=labels.astype(np.int64),
        class_names=tuple(names),
        normalized=bool(header.get("normalized", True)),
    )


def _save_jsonl(images: ImageFeatureSet, path: Path) -> Path:
    """Writes a header line followed by one {label, feature} per image."""
    header = {
        "class_names": list(images.class_names),
        "normalized": images.normalized,
    }
    lines = [json.dumps(header, sort_keys=True)]
    for feature, label in zip(images.features, images.labels):
        record = {"feature": feature.tolist(), "label": int(label)}
        lines.append(json.dumps(record, sort_keys=True))
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def _load_jsonl(path: Path) -> ImageFeatureSet:
    """Reads the JSONL text form of an image feature set."""
    try:
        lines = [
            line
            for line in path.read_text(encoding="utf-8").splitlines()
            if line.strip()
        ]
    except FileNotFoundError as error:
        raise ArtifactIOError(f"Features '{path}' not found.") from error
    if not lines:
        raise ArtifactIOError(f"Features '{path}' are empty.")
    rows, labels = [], []
    for number, line in enumerate(lines, start=1):
        try:
            record = json.loads(line)
            if number == 1:
                header = record
                names = header["class_names"]
                continue
            rows.append([float(value) for value in record["feature"]])
            labels.append(int(record["label"]))
        except (json.JSONDecodeError, KeyError, TypeError) as error:
            raise ArtifactIOError(
                f"{path}:{number}: malformed record ({error})."
            ) from error
    width = len(rows[0]) if rows else 0
    return ImageFeatureSet(
        features=np.array(rows).reshape(len(rows), width),
        labels=np.array(labels, dtype=np.int64),
        class_names=tuple(names),
        normalized=bool(header.get("normalized", True)),
    )
