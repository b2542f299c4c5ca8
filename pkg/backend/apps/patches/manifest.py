"""
Dataset manifest: JSON Lines, one painting per line.

    {"path": "images/human_painting_1.png", "painting_id": "human_painting_1", "author": "human"}

Relative paths are resolved against the manifest's directory.
"""

import json
import logging
import os
from dataclasses import dataclass
from pathlib import Path

from rest_framework.renderers import JSONRenderer

from apps.core.exceptions import FormatError
from apps.patches.extraction import DEFAULT_PATCH_SIZE, DEFAULT_STRIDE, extract_labeled_patches
from apps.patches.images import load_image
from apps.patches.labels import Author
from apps.patches.serializers import ManifestEntrySerializer

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ManifestEntry:
    path: Path
    painting_id: str
    author: Author

    @property
    def is_pure(self):
        return self.author is not Author.HYBRID


def read_jsonl(path, serializer_class, what):
    """Validate every non-blank line of a JSON Lines file with serializer_class."""
    path = Path(path)
    try:
        lines = path.read_text(encoding='utf-8').splitlines()
    except OSError as exc:
        raise FormatError(f'Cannot read {what} {path}: {exc}') from exc

    records = []
    for number, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            data = json.loads(line)
        except json.JSONDecodeError as exc:
            raise FormatError(f'{path}:{number}: invalid JSON ({exc.msg})') from exc
        serializer = serializer_class(data=data)
        if not serializer.is_valid():
            raise FormatError(f'{path}:{number}: invalid {what} record {dict(serializer.errors)}')
        records.append(serializer.validated_data)
    return records


def write_jsonl(path, rows):
    """Write mappings as compact JSON lines."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    renderer = JSONRenderer()
    with path.open('wb') as handle:
        for row in rows:
            handle.write(renderer.render(row))
            handle.write(b'\n')
    return path


def load_manifest(path):
    """
    Read a manifest into ManifestEntry objects (file order kept).

    Duplicate painting ids are kept as-is; fold construction asserts leakage.
    """
    path = Path(path)
    base = path.parent
    entries = []
    for data in read_jsonl(path, ManifestEntrySerializer, 'manifest'):
        image_path = Path(data['path'])
        if not image_path.is_absolute():
            image_path = base / image_path
        entries.append(ManifestEntry(
            path=image_path, painting_id=data['painting_id'], author=Author(data['author']),
        ))
    logger.info('Loaded manifest %s with %d paintings', path, len(entries))
    return entries


def write_manifest(path, entries):
    path = Path(path)
    base = path.parent.resolve()
    rows = []
    for entry in entries:
        image_path = Path(entry.path).resolve()
        try:
            stored = image_path.relative_to(base).as_posix()
        except ValueError:
            stored = os.fspath(image_path)
        serializer = ManifestEntrySerializer(data={
            'path': stored, 'painting_id': entry.painting_id, 'author': Author.parse(entry.author).value,
        })
        serializer.is_valid(raise_exception=True)
        rows.append(serializer.validated_data)
    return write_jsonl(path, rows)


def load_entry_image(entry):
    return load_image(entry.path, painting_id=entry.painting_id, author=entry.author)


def load_entry_patches(entry, size=DEFAULT_PATCH_SIZE, stride=DEFAULT_STRIDE):
    """Load one manifest painting and tile it (labels only for pure paintings)."""
    return extract_labeled_patches(load_entry_image(entry), size, stride)
