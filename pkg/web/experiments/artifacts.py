"""
Artifact bundles: CSV tables, JSON documents and a manifest of both.

Files are written in a fixed order with fixed formatting (``repr`` floats,
sorted JSON keys, ``\\n`` line ends), so a run repeated with the same config
and seed produces byte-identical files.
"""

import csv
import hashlib
import json
import logging
import math
from pathlib import Path
from typing import Any

import numpy as np

from .exceptions import IoFailure, ManifestMismatch

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"
HASH_CHUNK = 1 << 16


def _cell(value: Any) -> Any:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, np.integer):
        return int(value)
    return value


def jsonable(value: Any) -> Any:
    """Plain JSON types; non-finite floats become null."""
    if isinstance(value, dict):
        return {str(key): jsonable(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(item) for item in value]
    if isinstance(value, np.ndarray):
        return [jsonable(item) for item in value.tolist()]
    if isinstance(value, (np.integer, np.bool_)):
        return value.item()
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


def file_digest(path: Path) -> str:
    digest = hashlib.sha256()
    with path.open("rb") as handle:
        for chunk in iter(lambda: handle.read(HASH_CHUNK), b""):
            digest.update(chunk)
    return digest.hexdigest()


class ArtifactWriter:
    """Writes the files of one run into ``directory`` and remembers them."""

    def __init__(self, directory: Path | str, formats=("csv", "json")):
        self.directory = Path(directory)
        self.formats = tuple(formats)
        self.paths: list[Path] = []
        try:
            self.directory.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise IoFailure(f"{self.directory}: {e.strerror or e}") from e

    def _target(self, name: str) -> Path:
        path = self.directory / name
        if path not in self.paths:
            self.paths.append(path)
        return path

    def write_csv(self, name: str, header, rows) -> Path | None:
        if "csv" not in self.formats:
            return None
        path = self._target(name)
        try:
            with path.open("w", newline="") as handle:
                writer = csv.writer(handle, lineterminator="\n")
                writer.writerow(header)
                for row in rows:
                    writer.writerow([_cell(value) for value in row])
        except OSError as e:
            raise IoFailure(f"{path}: {e.strerror or e}") from e
        return path

    def write_json(self, name: str, data: Any, always: bool = False) -> Path | None:
        if "json" not in self.formats and not always:
            return None
        path = self._target(name)
        text = json.dumps(jsonable(data), indent=2, sort_keys=True) + "\n"
        try:
            path.write_text(text)
        except OSError as e:
            raise IoFailure(f"{path}: {e.strerror or e}") from e
        return path

    def write_manifest(self) -> Path:
        """List every file written so far with its size and sha256."""
        entries = []
        for path in sorted(self.paths):
            try:
                entries.append(
                    {
                        "path": path.name,
                        "bytes": path.stat().st_size,
                        "sha256": file_digest(path),
                    }
                )
            except OSError as e:
                raise IoFailure(f"{path}: {e.strerror or e}") from e
        manifest = self.directory / MANIFEST_NAME
        try:
            manifest.write_text(json.dumps({"files": entries}, indent=2) + "\n")
        except OSError as e:
            raise IoFailure(f"{manifest}: {e.strerror or e}") from e
        logger.info(f"Wrote {len(entries)} artifacts to {self.directory}")
        return manifest


def verify_manifest(directory: Path | str) -> int:
    """
    Check every manifest entry against the file on disk.

    Returns the number of files checked.

    Raises:
        IoFailure: the manifest or a listed file cannot be read
        ManifestMismatch: a size or hash differs
    """
    directory = Path(directory)
    manifest = directory / MANIFEST_NAME
    try:
        entries = json.loads(manifest.read_text())["files"]
    except OSError as e:
        raise IoFailure(f"{manifest}: {e.strerror or e}") from e
    except (ValueError, KeyError) as e:
        raise ManifestMismatch(f"{manifest}: not a manifest ({e})") from e

    for entry in entries:
        path = directory / entry["path"]
        try:
            size = path.stat().st_size
            digest = file_digest(path)
        except OSError as e:
            raise IoFailure(f"{path}: {e.strerror or e}") from e
        if size != entry["bytes"] or digest != entry["sha256"]:
            raise ManifestMismatch(f"{path}: content differs from the manifest")
    logger.info(f"Verified {len(entries)} artifacts in {directory}")
    return len(entries)
