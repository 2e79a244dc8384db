"""Per-scene annotation documents on disk.

One JSON document per scene holds everything the annotation flow produces:
court clicks, the solved camera, ball clicks with their lifted 3D positions,
player height labels with realigned summaries, and fitted trajectory
segments. The store keeps inputs next to outputs so any derived value can be
recomputed from the stored clicks by the matching CLI command.

Concurrency is optimistic: every document carries a version counter, writers
pass the version they based their edit on, and a mismatch is rejected so the
caller can reload. Saving identical content is a no-op (no version bump, no
write). All writes go through a temp file and an atomic rename.
"""

from __future__ import annotations

import copy
import json
import os
import tempfile
from pathlib import Path

from .calibration import InvalidCameraError, PinholeCamera

SCHEMA_VERSION = 1

STORE_ROOT_ENV = "COURTSCENE_STORE"
DEFAULT_STORE_ROOT = "annotations"


class StoreError(RuntimeError):
    pass


class SceneNotFoundError(StoreError):
    pass


class VersionConflictError(StoreError):
    def __init__(self, scene_id: str, expected: int, actual: int):
        super().__init__(
            f"scene {scene_id!r}: write based on version {expected}, "
            f"store has {actual}; reload and retry"
        )
        self.scene_id = scene_id
        self.expected = expected
        self.actual = actual


class DocumentError(StoreError):
    pass


def default_store_root() -> Path:
    """Store root from the environment override, else ./annotations."""
    return Path(os.environ.get(STORE_ROOT_ENV, DEFAULT_STORE_ROOT))


def new_document(scene_id: str, sport: str, meta: dict | None = None) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "version": 0,
        "scene_id": scene_id,
        "sport": sport,
        "meta": dict(meta or {}),
        "frames": {},
        "trajectories": [],
    }


def _canonical_bytes(document: dict) -> bytes:
    return (json.dumps(document, indent=2, sort_keys=True) + "\n").encode("utf-8")


def _content_key(document: dict) -> str:
    # Version excluded: two documents are "the same" when everything else is.
    stripped = {k: v for k, v in document.items() if k != "version"}
    return json.dumps(stripped, sort_keys=True)


def validate_document(document: dict) -> None:
    """Reject documents that would poison later reads.

    Checks the structural skeleton and that every stored camera still
    satisfies the pinhole invariants (positive focals, orthonormal R).
    """
    if not isinstance(document, dict):
        raise DocumentError("document must be a JSON object")
    for key, typ in (("scene_id", str), ("sport", str), ("frames", dict)):
        if not isinstance(document.get(key), typ):
            raise DocumentError(f"document field {key!r} missing or wrong type")
    for frame_id, frame in document["frames"].items():
        if not isinstance(frame, dict):
            raise DocumentError(f"frame {frame_id!r} must be an object")
        cam = frame.get("camera")
        if cam is not None:
            try:
                PinholeCamera.from_dict(cam).validate()
            except (InvalidCameraError, KeyError, TypeError, ValueError) as e:
                raise DocumentError(f"frame {frame_id!r} camera invalid: {e}") from e


class AnnotationStore:
    """Directory of per-scene annotation documents, one JSON file each."""

    def __init__(self, root: str | Path, create: bool = True):
        self.root = Path(root)
        if create:
            self.root.mkdir(parents=True, exist_ok=True)
        elif not self.root.is_dir():
            raise StoreError(f"store root {self.root} does not exist")

    def scene_path(self, scene_id: str) -> Path:
        if not scene_id or "/" in scene_id or scene_id.startswith("."):
            raise StoreError(f"bad scene id {scene_id!r}")
        return self.root / f"{scene_id}.json"

    def list_scenes(self) -> list[str]:
        return sorted(p.stem for p in self.root.glob("*.json"))

    def exists(self, scene_id: str) -> bool:
        return self.scene_path(scene_id).is_file()

    def load(self, scene_id: str) -> dict:
        path = self.scene_path(scene_id)
        if not path.is_file():
            raise SceneNotFoundError(f"scene {scene_id!r} not in store {self.root}")
        with open(path, encoding="utf-8") as f:
            return json.load(f)

    def save(self, scene_id: str, document: dict, base_version: int | None = None) -> dict:
        """Persist a document, bumping its version only when content changed.

        base_version is the version the caller loaded before editing; pass 0
        (or the version of a fresh new_document) when creating. None skips
        the concurrency check, for single-writer batch use.
        """
        path = self.scene_path(scene_id)
        if document.get("scene_id") not in (None, scene_id):
            raise DocumentError(
                f"document scene_id {document.get('scene_id')!r} != {scene_id!r}"
            )
        document = copy.deepcopy(document)
        document["scene_id"] = scene_id
        document.setdefault("schema_version", SCHEMA_VERSION)
        document.setdefault("frames", {})
        document.setdefault("trajectories", [])
        document.setdefault("meta", {})
        validate_document(document)

        stored = self.load(scene_id) if path.is_file() else None
        current_version = stored["version"] if stored else 0
        if base_version is not None and base_version != current_version:
            raise VersionConflictError(scene_id, base_version, current_version)
        if stored is not None and _content_key(stored) == _content_key(document):
            return stored  # idempotent: same content, no bump, no write

        document["version"] = current_version + 1
        self._write_atomic(path, _canonical_bytes(document))
        return document

    def _write_atomic(self, path: Path, data: bytes) -> None:
        fd, tmp = tempfile.mkstemp(dir=self.root, prefix=f".{path.stem}.", suffix=".tmp")
        try:
            with os.fdopen(fd, "wb") as f:
                f.write(data)
                f.flush()
                os.fsync(f.fileno())
            os.replace(tmp, path)
        except BaseException:
            try:
                os.unlink(tmp)
            except OSError:
                pass
            raise


__all__ = [
    "AnnotationStore",
    "DEFAULT_STORE_ROOT",
    "DocumentError",
    "SCHEMA_VERSION",
    "STORE_ROOT_ENV",
    "SceneNotFoundError",
    "StoreError",
    "VersionConflictError",
    "default_store_root",
    "new_document",
    "validate_document",
]
