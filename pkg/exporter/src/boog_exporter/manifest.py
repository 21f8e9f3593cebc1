"""Text manifest: JSON lines of {id, text}, ids dense from 0 in order."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .errors import ManifestError

KINDS = ("node", "class")


@dataclass(frozen=True)
class TextManifest:
    """Ordered (id, text) records for one embedding export.

    kind says what the texts describe; it picks the prompt template and
    nothing else.
    """

    records: tuple[tuple[int, str], ...]
    kind: str = "node"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ManifestError(
                f"kind must be one of {KINDS}, got {self.kind!r}")
        if not self.records:
            raise ManifestError("manifest is empty")
        for position, (rid, text) in enumerate(self.records):
            if not isinstance(rid, int) or isinstance(rid, bool):
                raise ManifestError(
                    f"record {position}: id must be an integer, got {rid!r}")
            if not isinstance(text, str):
                raise ManifestError(
                    f"record {position} (id {rid}): text must be a string")
        ids = [rid for rid, _ in self.records]
        if ids != list(range(len(ids))):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            if dupes:
                raise ManifestError(f"duplicate ids: {dupes}")
            raise ManifestError(
                f"ids must be dense from 0 in order, got {ids}")

    def __len__(self) -> int:
        return len(self.records)

    @property
    def texts(self) -> list[str]:
        return [text for _, text in self.records]


def load_manifest(path, kind: str = "node") -> TextManifest:
    """Parse a JSON-lines manifest, one {"id": int, "text": str} per line."""
    raw = Path(path).read_text(encoding="utf-8")
    records = []
    for lineno, line in enumerate(raw.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            doc = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ManifestError(f"{path}:{lineno}: invalid JSON: {exc}")
        if not isinstance(doc, dict):
            raise ManifestError(f"{path}:{lineno}: expected an object")
        if "id" not in doc or "text" not in doc:
            raise ManifestError(
                f"{path}:{lineno}: record needs 'id' and 'text' keys, "
                f"got {sorted(doc)}")
        records.append((doc["id"], doc["text"]))
    return TextManifest(records=tuple(records), kind=kind)
