"""
Builds a classifier head and scores it on a set of image features.
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import TYPE_CHECKING

from ..data.curation import load_dataset
from ..data.records import ClassRecord, load_classes
from ..evaluation.features import load_features
from ..evaluation.head import (
    build_head,
    build_head_adapter,
    build_head_ensemble,
    build_head_plain,
)
from ..evaluation.report import (
    AVERAGE_ROW,
    TransferReport,
    datasets_frame,
    evaluate,
    render_table,
    reports_frame,
    transfer_frame,
)
from ..structures.enums import (
    ArtifactItem,
    ClassSplit,
    ExecutionMode,
    HeadProvenance,
)
from ..structures.errors import ValidationError
from ..training.checkpoint import load_adapter, load_checkpoint
from .common import load_encoder, open_run, write_manifest

if TYPE_CHECKING:
    from typing import Callable, Sequence

    from ..config import Config
    from ..encoder.model import TextEncoder
    from ..evaluation.features import ImageFeatureSet
    from ..evaluation.head import ClassifierHead
    from .common import RunContext

logger = logging.getLogger(__name__)


def resolve_classes(
    context: RunContext,
    images: ImageFeatureSet,
) -> list[ClassRecord]:
    """Gets the class records of the image label space.

    A configured class list supplies suffixes and splits; otherwise every
    image class becomes a plain record.
    """
    path = context.config.get_path("classes", required=False)
    if path is None:
        return [
            ClassRecord(class_id=index, name=name)
            for index, name in enumerate(images.class_names)
        ]
    listed = load_classes(context.add_input(path))
    records = {record.name: record for record in listed}
    missing = [name for name in images.class_names if name not in records]
    if missing:
        raise ValidationError(
            f"Image classes missing from the class list: {missing[:5]}."
        )
    return [records[name] for name in images.class_names]


def make_head_factory(
    context: RunContext,
    encoder: TextEncoder,
) -> Callable[[Sequence[ClassRecord]], ClassifierHead]:
    """Creates a function that builds the configured head for classes."""
    settings = context.run.evaluation
    template = settings.template
    temperature = settings.temperature
    match settings.head:
        case HeadProvenance.PROMPTED:
            checkpoint = load_checkpoint(
                context.input_path("checkpoint", with_blob=True)
            )
            return lambda classes: build_head(
                classes, checkpoint, encoder, template, temperature
            )
        case HeadProvenance.ADAPTER:
            adapter = load_adapter(
                context.input_path("checkpoint", with_blob=True)
            )
            return lambda classes: build_head_adapter(
                classes, adapter, encoder, template, temperature
            )
        case HeadProvenance.ENSEMBLED:
            dataset = load_dataset(context.input_path("dataset"))
            ids = {record.name: record.class_id for record in dataset.classes}

            def ensembled(classes):
                missing = [r.name for r in classes if r.name not in ids]
                if missing:
                    raise ValidationError(
                        f"Classes without descriptions: {missing[:5]}."
                    )
                subset = dataset.subset(ids[r.name] for r in classes)
                return build_head_ensemble(subset, encoder, temperature)

            return ensembled
        case _:
            return lambda classes: build_head_plain(
                classes, encoder, template, temperature
            )


def load_image_sets(context: RunContext) -> dict[str, ImageFeatureSet]:
    """Loads every configured feature file, keyed by its dataset name."""
    paths = context.config.get_paths("features")
    names = [path.stem for path in paths]
    if len(set(names)) < len(names):
        names = [str(path) for path in paths]
    image_sets = {}
    for name, path in zip(names, paths):
        context.add_input(path, with_blob=path.suffix != ".jsonl")
        image_sets[name] = load_features(path)
    return image_sets


def score_datasets(
    context: RunContext,
    image_sets: dict[str, ImageFeatureSet],
    factory: Callable[[Sequence[ClassRecord]], ClassifierHead],
) -> tuple[dict, str]:
    """Scores one head per dataset and averages their top-1 accuracy.

    Every dataset is classified in its own label space, which is how a
    model trained once is carried across datasets and domain shifts.
    """
    tag = context.run.evaluation.tag
    reports = {}
    for name, images in image_sets.items():
        classes = resolve_classes(context, images)
        reports[name] = evaluate(images, factory(classes), tag=tag)
        logger.info(
            "%s: top-1 accuracy %.2f%%.", name, 100 * reports[name].top1
        )
    frame = datasets_frame(reports)
    average = float(frame["top1"].iloc[-1])
    logger.info("%s top-1 accuracy %.2f%%.", AVERAGE_ROW, average)
    report = {
        "datasets": {
            name: result.to_dict() for name, result in reports.items()
        },
        "average": {"top1": average / 100.0},
    }
    return report, render_table(frame)


def score_single(
    context: RunContext,
    images: ImageFeatureSet,
    factory: Callable[[Sequence[ClassRecord]], ClassifierHead],
) -> tuple[dict, str]:
    """Scores one dataset, split into base and novel when classes say so.

    When the class list marks both base and novel classes, each side is
    scored in its own label space and their harmonic mean is reported.
    """
    classes = resolve_classes(context, images)
    tag = context.run.evaluation.tag
    head_label = context.run.evaluation.head.label

    base = [r for r in classes if r.split == ClassSplit.BASE]
    novel = [r for r in classes if r.split == ClassSplit.NOVEL]
    if base and novel:
        result = TransferReport(
            evaluate(images, factory(base), tag=tag),
            evaluate(images, factory(novel), tag=tag),
        )
        logger.info(
            "Base %.2f%%, novel %.2f%%, HM %.2f%%.",
            100 * result.base.top1,
            100 * result.novel.top1,
            100 * result.harmonic_mean,
        )
        report = {"transfer": {head_label: result.to_dict()}}
        return report, render_table(transfer_frame({head_label: result}))
    result = evaluate(images, factory(classes), tag=tag)
    logger.info("Top-1 accuracy %.2f%%.", 100 * result.top1)
    report = {"reports": [result.to_dict()]}
    return report, render_table(reports_frame([result]))


def cmd_eval(config: Config) -> Path:
    """Scores the configured head; returns the run directory.

    Several feature files are scored one by one and summarized with an
    average row.
    """
    context = open_run(config, ExecutionMode.EVAL)
    encoder = load_encoder(context)
    image_sets = load_image_sets(context)
    factory = make_head_factory(context, encoder)
    if len(image_sets) > 1:
        report, table = score_datasets(context, image_sets, factory)
    else:
        (images,) = image_sets.values()
        report, table = score_single(context, images, factory)

    context.store.save_json(ArtifactItem.REPORT, report)
    context.store.save_text(ArtifactItem.REPORT_TABLE, table)
    write_manifest(context)
    return context.store.directory
