"""
Handles the tensor archive format: a JSON manifest plus a flat blob.

The blob holds every tensor as little-endian float64 values, one after
another in sorted name order. The manifest records, per tensor, its shape,
the blob filename and the byte offset of its first value.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import TYPE_CHECKING, Any

import numpy as np

from ..structures.errors import ArtifactIOError
from ..utilities import read_json, write_json

if TYPE_CHECKING:
    from typing import Mapping

BLOB_DTYPE = np.dtype("<f8")


def get_blob_path(manifest_path: Path) -> Path:
    """Gets the blob path that belongs next to a manifest."""
    return manifest_path.with_suffix(".bin")


def pack_tensors(
    tensors: Mapping[str, np.ndarray],
    data_file: str,
) -> tuple[bytes, dict[str, dict]]:
    """Serializes tensors into one blob and returns it with its entries."""
    chunks = []
    entries = {}
    offset = 0
    for name in sorted(tensors):
        array = np.ascontiguousarray(tensors[name], dtype=BLOB_DTYPE)
        entries[name] = {
            "shape": list(array.shape),
            "data_file": data_file,
            "offset": offset,
        }
        chunk = array.tobytes(order="C")
        chunks.append(chunk)
        offset += len(chunk)
    return b"".join(chunks), entries


def unpack_tensors(
    blob: bytes,
    entries: Mapping[str, dict],
) -> dict[str, np.ndarray]:
    """Reads every tensor described by the entries out of a blob."""
    tensors = {}
    for name, entry in entries.items():
        shape = tuple(int(size) for size in entry["shape"])
        count = int(np.prod(shape, dtype=np.int64))
        offset = int(entry["offset"])
        end = offset + count * BLOB_DTYPE.itemsize
        if offset < 0 or end > len(blob):
            raise ArtifactIOError(
                f"Tensor '{name}' runs past the end of its blob."
            )
        if count == 0:
            tensors[name] = np.zeros(shape)
            continue
        array = np.frombuffer(
            blob, dtype=BLOB_DTYPE, count=count, offset=offset
        )
        tensors[name] = array.astype(np.float64).reshape(shape)
    return tensors


def write_archive(
    manifest_path: Path,
    header: dict[str, Any],
    tensors: Mapping[str, np.ndarray],
) -> list[Path]:
    """Writes a manifest and its blob, returning both paths."""
    blob_path = get_blob_path(manifest_path)
    blob, entries = pack_tensors(tensors, blob_path.name)
    manifest = dict(header)
    manifest["tensors"] = entries
    try:
        manifest_path.parent.mkdir(parents=True, exist_ok=True)
        with open(blob_path, "wb") as f:
            f.write(blob)
        write_json(manifest_path, manifest)
    except OSError as error:
        raise ArtifactIOError(
            f"Could not write archive '{manifest_path}': {error}"
        ) from error
    return [manifest_path, blob_path]


def read_archive(
    manifest_path: Path,
) -> tuple[dict[str, Any], dict[str, np.ndarray]]:
    """Reads a manifest and the tensors of the blob(s) it references."""
    manifest_path = Path(manifest_path)
    try:
        manifest = read_json(manifest_path)
    except FileNotFoundError as error:
        raise ArtifactIOError(
            f"Archive '{manifest_path}' not found."
        ) from error
    except json.JSONDecodeError as error:
        raise ArtifactIOError(
            f"Archive '{manifest_path}' is not valid JSON: {error}"
        ) from error
    entries = manifest.pop("tensors", None)
    if not isinstance(entries, dict):
        raise ArtifactIOError(
            f"Archive '{manifest_path}' has no tensors section."
        )
    blobs: dict[str, bytes] = {}
    tensors = {}
    for name, entry in sorted(entries.items()):
        data_file = entry.get("data_file")
        if data_file is None or "shape" not in entry or "offset" not in entry:
            raise ArtifactIOError(
                f"Tensor entry '{name}' in '{manifest_path}' is incomplete."
            )
        if data_file not in blobs:
            blob_path = manifest_path.parent / data_file
            try:
                blobs[data_file] = blob_path.read_bytes()
            except OSError as error:
                raise ArtifactIOError(
                    f"Blob '{blob_path}' could not be read."
                ) from error
        tensors.update(unpack_tensors(blobs[data_file], {name: entry}))
    return manifest, tensors
