"""
Zero-shot classification of precomputed image features.
"""

from .features import (
    ImageFeatureSet,
    load_features,
    save_features,
    synthesize_image_features,
)
from .head import (
    ClassifierHead,
    build_head,
    build_head_adapter,
    build_head_ensemble,
    build_head_plain,
)
from .metrics import (
    Classification,
    Confidence,
    aggregate,
    classify,
    confidence_report,
    harmonic_mean,
    top1_accuracy,
)
from .report import EvalReport, TransferReport, evaluate, render_table

__all__ = [
    "Classification",
    "ClassifierHead",
    "Confidence",
    "EvalReport",
    "ImageFeatureSet",
    "TransferReport",
    "aggregate",
    "build_head",
    "build_head_adapter",
    "build_head_ensemble",
    "build_head_plain",
    "classify",
    "confidence_report",
    "evaluate",
    "harmonic_mean",
    "load_features",
    "render_table",
    "save_features",
    "synthesize_image_features",
    "top1_accuracy",
]
