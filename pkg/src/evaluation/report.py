"""
Evaluation reports and their JSON and plain-text table renderings.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any

import numpy as np
import pandas as pd

from .metrics import (
    aggregate,
    classify,
    confidence_report,
    harmonic_mean,
    top1_accuracy,
)

AVERAGE_ROW = "Average"

if TYPE_CHECKING:
    from typing import Sequence

    from .features import ImageFeatureSet
    from .head import ClassifierHead


@dataclass(frozen=True)
class EvalReport:
    """Accuracy and confidence of one head on one image set."""

    top1: float
    per_class: dict[str, float]
    correct_confidence: float
    incorrect_confidence: float
    count: int
    head: str
    tag: str | None = None

    def to_dict(self) -> dict[str, Any]:
        """Converts the report into JSON values."""
        return {
            "tag": self.tag,
            "head": self.head,
            "count": self.count,
            "top1": self.top1,
            "per_class": dict(self.per_class),
            "correct_confidence": self.correct_confidence,
            "incorrect_confidence": self.incorrect_confidence,
        }


@dataclass(frozen=True)
class TransferReport:
    """Base and novel reports of one head, each in its own label space."""

    base: EvalReport
    novel: EvalReport
    extra: dict[str, Any] = field(default_factory=dict)

    @property
    def harmonic_mean(self) -> float:
        """Gets the base and novel harmonic mean, or 0 if either is 0."""
        if self.base.top1 <= 0 or self.novel.top1 <= 0:
            return 0.0
        return harmonic_mean(self.base.top1, self.novel.top1)

    def to_dict(self) -> dict[str, Any]:
        """Converts the report into JSON values."""
        return {
            "base": self.base.to_dict(),
            "novel": self.novel.to_dict(),
            "harmonic_mean": self.harmonic_mean,
            **self.extra,
        }


def evaluate(
    images: ImageFeatureSet,
    head: ClassifierHead,
    tag: str | None = None,
) -> EvalReport:
    """Classifies every image and summarizes the result."""
    if tuple(images.class_names) != tuple(head.class_names):
        images = images.restrict(head.class_names)
    result = classify(images, head)
    confidence = confidence_report(result.probabilities, images.labels)
    per_class = {}
    for index, name in enumerate(head.class_names):
        mask = images.labels == index
        if mask.any():
            per_class[name] = float(
                np.mean(result.predictions[mask] == index)
            )
    return EvalReport(
        top1=top1_accuracy(result.predictions, images.labels),
        per_class=per_class,
        correct_confidence=confidence.correct,
        incorrect_confidence=confidence.incorrect,
        count=images.n,
        head=head.provenance.label,
        tag=tag,
    )


def reports_frame(reports: Sequence[EvalReport]) -> pd.DataFrame:
    """Tabulates reports with accuracies and confidences in percent."""
    return pd.DataFrame(
        [
            {
                "tag": report.tag or "",
                "head": report.head,
                "n": report.count,
                "top1": 100.0 * report.top1,
                "correct_conf": 100.0 * report.correct_confidence,
                "incorrect_conf": 100.0 * report.incorrect_confidence,
            }
            for report in reports
        ]
    )


def transfer_frame(results: dict[str, TransferReport]) -> pd.DataFrame:
    """Tabulates base, novel and HM accuracy in percent per head."""
    return pd.DataFrame(
        [
            {
                "head": name,
                "base": 100.0 * result.base.top1,
                "novel": 100.0 * result.novel.top1,
                "hm": 100.0 * result.harmonic_mean,
            }
            for name, result in results.items()
        ]
    )


def datasets_frame(reports: dict[str, EvalReport]) -> pd.DataFrame:
    """Tabulates top-1 accuracy per dataset plus their average row."""
    rows = [
        {
            "dataset": name,
            "head": report.head,
            "n": report.count,
            "top1": 100.0 * report.top1,
        }
        for name, report in reports.items()
    ]
    rows.append(
        {
            "dataset": AVERAGE_ROW,
            "head": rows[0]["head"] if rows else "",
            "n": sum(row["n"] for row in rows),
            "top1": aggregate([row["top1"] for row in rows]),
        }
    )
    return pd.DataFrame(rows)


def render_table(df: pd.DataFrame) -> str:
    """Renders a table as aligned columns with two decimals."""
    if df.empty:
        return "(no rows)\n"
    return df.to_string(index=False, float_format=lambda x: f"{x:.2f}") + "\n"
