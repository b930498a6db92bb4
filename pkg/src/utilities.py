"""
Utility functions for the project.
"""

from __future__ import annotations

import argparse
import datetime as dt
import hashlib
import json
import logging
import subprocess
from importlib import metadata
from pathlib import Path
from typing import Any, Iterator, NoReturn, Sequence

from tqdm import tqdm

PACKAGE_NAME = "textprompts"
LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


class TqdmHandler(logging.Handler):
    """Emits log records through tqdm so they do not break progress bars."""

    def emit(self, record: logging.LogRecord) -> None:
        """Writes the formatted record above any active progress bar."""
        try:
            tqdm.write(self.format(record))
        except Exception:
            self.handleError(record)


def configure_logging(level: str | int = "INFO") -> logging.Logger:
    """Installs the tqdm handler on the project logger and sets its level."""
    logger = logging.getLogger("src")
    for handler in list(logger.handlers):
        if isinstance(handler, TqdmHandler):
            logger.removeHandler(handler)
    handler = TqdmHandler()
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    logger.addHandler(handler)
    if isinstance(level, str):
        level = level.upper()
    logger.setLevel(level)
    logger.propagate = False
    return logger


def validate_directory(path: str) -> Path | NoReturn:
    """Checks if a directory is valid, otherwise raises an exception."""
    if (path_obj := Path(path)).is_dir():
        return path_obj
    raise argparse.ArgumentTypeError(f"Directory '{path}' does not exist.")


def to_path(path: str | Path | None, default: str | None = None) -> Path:
    """Converts the provided object into a Path and returns it.

    If the provided object is None, the default path is returned.
    """
    if path is None:
        path = Path(default) if default is not None else None
    elif isinstance(path, str):
        path = Path(path)
    return path


def read_json(filename: str | Path) -> Any:
    """Reads a JSON file and returns the contents."""
    with open(filename, "r", encoding="utf-8") as f:
        return json.load(f)


def write_json(filename: str | Path, data: Any, indent: int = 4) -> None:
    """Writes data to a JSON file with sorted keys."""
    with open(filename, "w", encoding="utf-8") as f:
        json.dump(data, f, indent=indent, sort_keys=True)
        f.write("\n")


def write_text(filename: str | Path, text: str) -> None:
    """Writes text to a file, ending it with a newline."""
    with open(filename, "w", encoding="utf-8") as f:
        f.write(text if text.endswith("\n") else text + "\n")


def get_iso_datetime() -> str:
    """Gets the current date and time in ISO format."""
    return dt.datetime.now(dt.timezone.utc).isoformat()


def as_chunks(sequence: Sequence[Any], size: int) -> Iterator[Sequence[Any]]:
    """Splits a sequence into chunks of a specified size."""
    return (
        sequence[pos : pos + size] for pos in range(0, len(sequence), size)
    )


def hash_file(filename: str | Path) -> str:
    """Gets the sha256 hex digest of a file, reading it in blocks."""
    digest = hashlib.sha256()
    with open(filename, "rb") as f:
        for block in iter(lambda: f.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


def get_version() -> str:
    """Gets a git-describe style version, falling back to the package."""
    try:
        result = subprocess.run(
            ["git", "describe", "--tags", "--always", "--dirty"],
            capture_output=True,
            text=True,
            timeout=5,
            cwd=Path(__file__).resolve().parent,
        )
    except (OSError, subprocess.SubprocessError):
        result = None
    if result is not None and result.returncode == 0 and result.stdout:
        return result.stdout.strip()
    try:
        return metadata.version(PACKAGE_NAME)
    except metadata.PackageNotFoundError:
        return "0.1.0"


def parse_override(text: str) -> tuple[list[str], Any]:
    """Parses a 'section.key=value' override into a key path and value.

    The value is decoded as JSON when possible and kept as a string
    otherwise, so '--set train.lr=0.01' yields a float.
    """
    if "=" not in text:
        raise ValueError(f"Override '{text}' must look like key=value.")
    key, raw = text.split("=", 1)
    keys = [part for part in key.strip().split(".") if part]
    if not keys:
        raise ValueError(f"Override '{text}' has an empty key.")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return keys, value


def deep_merge(base: dict, update: dict) -> dict:
    """Recursively merges update into a copy of base and returns it."""
    merged = dict(base)
    for key, value in update.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged
