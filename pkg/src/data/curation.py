"""
Builds, saves and loads text-to-text prompt datasets.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import TYPE_CHECKING

from tqdm import tqdm

from ..structures.enums import CurationMode, PairSource
from ..structures.errors import ArtifactIOError, ValidationError
from ..utilities import read_json, write_json
from .records import ClassRecord, PromptDataset, PromptPair, QueryTemplate
from .templates import (
    ATTRIBUTE_TEMPLATES,
    DEFAULT_QUERIES,
    IMAGENET_TEMPLATES,
    as_queries,
)

if TYPE_CHECKING:
    from typing import Mapping, Sequence

    from ..config import CurateConfig
    from .client import LlmClient

logger = logging.getLogger(__name__)

PAIR_FIELDS = ("class_id", "class_name", "input", "output", "source")


def build_inputs(
    classes: Sequence[ClassRecord],
    template: str,
) -> dict[int, str]:
    """Renders the input template for every class, adding its suffix."""
    query = QueryTemplate(template)
    return {
        record.class_id: query.render(record.name)
        + (record.concept_suffix or "")
        for record in classes
    }


def generate_outputs(
    classes: Sequence[ClassRecord],
    queries: Sequence[QueryTemplate],
    client: LlmClient,
    outputs_per_query: int,
    workers: int = 1,
) -> dict[int, list[str]]:
    """Collects M completions per query for every class.

    Requests may run concurrently, but results are gathered in class then
    query order. Blank completions are dropped with a warning.
    """
    if outputs_per_query < 1:
        raise ValidationError("outputs_per_query must be at least 1.")
    jobs = [(record, query) for record in classes for query in queries]

    def run(job: tuple[ClassRecord, QueryTemplate]) -> list[str]:
        record, query = job
        return client.complete(record, query, outputs_per_query)

    outputs: dict[int, list[str]] = {r.class_id: [] for r in classes}
    with ThreadPoolExecutor(max_workers=max(workers, 1)) as executor:
        results = executor.map(run, jobs)
        for (record, query), completions in tqdm(
            zip(jobs, results),
            total=len(jobs),
            desc="Curating",
            unit="query",
            leave=False,
        ):
            kept = [text for text in completions if text.strip()]
            dropped = len(completions) - len(kept)
            if dropped:
                logger.warning(
                    "Dropped %d blank completion(s) for '%s', query %d.",
                    dropped,
                    record.name,
                    query.query_id,
                )
            outputs[record.class_id].extend(kept)
    return outputs


def assemble_dataset(
    classes: Sequence[ClassRecord],
    inputs: Mapping[int, str],
    outputs: Mapping[int, Sequence[str]],
    source: PairSource = PairSource.LLM,
    meta: dict | None = None,
) -> PromptDataset:
    """Pairs every output with the single input of its class."""
    orphans = sorted(set(outputs) - set(inputs))
    if orphans:
        raise ValidationError(f"Outputs without an input for {orphans}.")
    pairs = [
        PromptPair(record.class_id, inputs[record.class_id], text, source)
        for record in classes
        for text in outputs.get(record.class_id, [])
    ]
    meta = dict(meta or {})
    meta.setdefault("generator", source.label)
    if "M" in meta and "N" in meta:
        expected = int(meta["M"]) * int(meta["N"]) * len(classes)
        if len(pairs) != expected:
            meta["filtered"] = expected - len(pairs)
    return PromptDataset(pairs=tuple(pairs), classes=tuple(classes), meta=meta)


def assemble_handcrafted(
    classes: Sequence[ClassRecord],
    inputs: Mapping[int, str],
    templates: Sequence[str],
    source: PairSource = PairSource.HANDCRAFTED_80,
) -> PromptDataset:
    """Renders each of K templates per class as that class's outputs."""
    queries = as_queries(templates)
    outputs = {
        record.class_id: [query.render(record.name) for query in queries]
        for record in classes
    }
    return assemble_dataset(
        classes, inputs, outputs, source, meta={"K": len(queries)}
    )


def curate(
    classes: Sequence[ClassRecord],
    settings: CurateConfig,
    client: LlmClient | None = None,
) -> PromptDataset:
    """Builds a dataset in the configured curation mode."""
    if not classes:
        raise ValidationError("Cannot curate a dataset without classes.")
    inputs = build_inputs(classes, settings.input_template)
    match settings.mode:
        case CurationMode.HANDCRAFTED_80:
            dataset = assemble_handcrafted(
                classes, inputs, IMAGENET_TEMPLATES, settings.mode.source
            )
        case CurationMode.HANDCRAFTED_ATTRIBUTE:
            dataset = assemble_handcrafted(
                classes, inputs, ATTRIBUTE_TEMPLATES, settings.mode.source
            )
        case _:
            if client is None:
                raise ValidationError(
                    f"Curation mode '{settings.mode.label}' needs a client."
                )
            queries = as_queries(settings.queries or DEFAULT_QUERIES)
            outputs = generate_outputs(
                classes,
                queries,
                client,
                settings.outputs_per_query,
                workers=settings.workers,
            )
            dataset = assemble_dataset(
                classes,
                inputs,
                outputs,
                settings.mode.source,
                meta={"M": settings.outputs_per_query, "N": len(queries)},
            )
    dataset = replace(
        dataset,
        meta={**dataset.meta, "input_template": settings.input_template},
    )
    logger.info(
        "Curated %d pairs for %d classes.", len(dataset), len(classes)
    )
    return dataset


def get_header_path(path: Path) -> Path:
    """Gets the sidecar header path of a dataset file."""
    return path.with_suffix(".header.json")


def save_dataset(dataset: PromptDataset, path: str | Path) -> list[Path]:
    """Writes the pairs as JSONL plus a header with classes and meta."""
    path = Path(path)
    names = {record.class_id: record.name for record in dataset.classes}
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            for pair in dataset.pairs:
                record = {
                    "class_id": pair.class_id,
                    "class_name": names[pair.class_id],
                    "input": pair.input_text,
                    "output": pair.output_text,
                    "source": pair.source.label,
                }
                f.write(json.dumps(record, sort_keys=True) + "\n")
        header = {
            "classes": [record.to_dict() for record in dataset.classes],
            "meta": dataset.meta,
        }
        write_json(get_header_path(path), header)
    except OSError as error:
        raise ArtifactIOError(
            f"Could not write dataset '{path}': {error}"
        ) from error
    return [path, get_header_path(path)]


def _parse_line(
    line: str,
    number: int,
    path: Path,
    names: Mapping[int, str],
) -> PromptPair:
    """Parses one JSONL record, naming the line on failure.

    Unreadable JSON is an artifact error; a well-formed record with bad
    content is a validation error.
    """
    where = f"{path}:{number}"
    try:
        record = json.loads(line)
    except json.JSONDecodeError as error:
        raise ArtifactIOError(f"{where}: invalid JSON ({error}).") from error
    if not isinstance(record, dict):
        raise ValidationError(f"{where}: expected an object.")
    missing = [name for name in PAIR_FIELDS if name not in record]
    if missing:
        raise ValidationError(f"{where}: missing {', '.join(missing)}.")
    class_id = record["class_id"]
    if names.get(class_id) != record["class_name"]:
        raise ValidationError(
            f"{where}: class {class_id} is not named "
            f"'{record['class_name']}' in the header."
        )
    try:
        return PromptPair(
            class_id=class_id,
            input_text=record["input"],
            output_text=record["output"],
            source=PairSource.parse(record["source"]),
        )
    except ValidationError as error:
        raise ValidationError(f"{where}: {error}") from error


def load_dataset(path: str | Path) -> PromptDataset:
    """Reads and validates a dataset written by save_dataset."""
    path = Path(path)
    header_path = get_header_path(path)
    try:
        header = read_json(header_path)
        lines = path.read_text(encoding="utf-8").splitlines()
    except FileNotFoundError as error:
        raise ArtifactIOError(
            f"Dataset file '{error.filename}' not found."
        ) from error
    except json.JSONDecodeError as error:
        raise ArtifactIOError(
            f"Dataset header '{header_path}' is not valid JSON."
        ) from error
    classes = [ClassRecord.from_dict(c) for c in header.get("classes", [])]
    names = {record.class_id: record.name for record in classes}
    pairs = [
        _parse_line(line, number, path, names)
        for number, line in enumerate(lines, start=1)
        if line.strip()
    ]
    return PromptDataset(
        pairs=tuple(pairs),
        classes=tuple(classes),
        meta=dict(header.get("meta", {})),
    )
