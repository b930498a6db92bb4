"""
Contains the ArtifactStore, which writes a run's artifacts to disk.
"""

from __future__ import annotations

from pathlib import Path
from typing import TYPE_CHECKING, Any

from ..structures.errors import ArtifactIOError
from ..utilities import hash_file, write_json, write_text

if TYPE_CHECKING:
    import pandas as pd

    from ..structures.enums import ArtifactItem


class ArtifactStore:
    """Handles the artifacts of one run directory.

    Every file written through the store is remembered, so the run
    manifest can list the hash of each output.
    """

    def __init__(self, directory: str | Path) -> None:
        """Initializes the ArtifactStore object."""
        self.directory = Path(directory)
        self.written: list[Path] = []

    def get_path(self, which: ArtifactItem | str) -> Path:
        """Gets the path of an artifact inside the run directory."""
        filename = which if isinstance(which, str) else which.filename
        return self.directory / filename

    def save_json(self, which: ArtifactItem | str, data: Any) -> Path:
        """Saves data to a JSON file."""
        path = self.get_path(which)
        self._guard(write_json, path, data)
        self.written.append(path)
        return path

    def save_text(self, which: ArtifactItem | str, text: str) -> Path:
        """Saves a plain text artifact."""
        path = self.get_path(which)
        self._guard(write_text, path, text)
        self.written.append(path)
        return path

    def save_frame(self, which: ArtifactItem | str, df: pd.DataFrame) -> Path:
        """Saves a table as CSV."""
        path = self.get_path(which)
        self._guard(df.to_csv, path, index=False, float_format="%.10g")
        self.written.append(path)
        return path

    def register(self, *paths: Path) -> None:
        """Records files written by other writers as outputs of the run."""
        self.written.extend(Path(path) for path in paths)

    def output_hashes(self) -> dict[str, str]:
        """Gets the sha256 of every written file, keyed by filename."""
        return {
            str(path.relative_to(self.directory)): hash_file(path)
            for path in sorted(set(self.written))
        }

    def _guard(self, writer: Any, path: Path, *args: Any, **kwargs: Any):
        """Runs a writer, converting OS errors into artifact errors."""
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            writer(path, *args, **kwargs)
        except OSError as error:
            raise ArtifactIOError(
                f"Could not write '{path}': {error}"
            ) from error

