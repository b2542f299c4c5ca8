"""
Binary patch cache.

    magic      4 bytes  b'BMPC'
    version    u8       1
    size       u16      patch side length
    count      u32      number of records
    per record:
        painting_id  64 bytes UTF-8, NUL padded
        x, y         u32, u32
        label        u8 (0 Blank, 1 Human, 2 Robot, 255 unlabeled)
        pixels       size*size little-endian float32
"""

import logging
import struct
from pathlib import Path

import numpy as np

from apps.core.exceptions import FormatError
from apps.patches.extraction import PatchRecord
from apps.patches.labels import PatchLabel

logger = logging.getLogger(__name__)

MAGIC = b'BMPC'
VERSION = 1
ID_BYTES = 64
UNLABELED = 255
HEADER = struct.Struct('<4sBHI')
RECORD = struct.Struct(f'<{ID_BYTES}sIIB')


def write_patch_cache(path, patches):
    """Write PatchRecords that all share one size."""
    path = Path(path)
    sizes = {patch.size for patch in patches}
    if len(sizes) > 1:
        raise FormatError(f'Patch cache needs a single patch size, got {sorted(sizes)}')
    size = sizes.pop() if sizes else 0
    encoded_ids = [patch.painting_id.encode('utf-8') for patch in patches]
    for patch, encoded in zip(patches, encoded_ids):
        if len(encoded) > ID_BYTES:
            raise FormatError(f'Painting id {patch.painting_id!r} exceeds {ID_BYTES} bytes')

    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open('wb') as handle:
        handle.write(HEADER.pack(MAGIC, VERSION, size, len(patches)))
        for patch, encoded in zip(patches, encoded_ids):
            label = UNLABELED if patch.label is None else int(patch.label)
            handle.write(RECORD.pack(encoded, patch.x, patch.y, label))
            handle.write(np.ascontiguousarray(patch.pixels, dtype='<f4').tobytes())
    logger.info('Wrote %d patches of size %d to %s', len(patches), size, path)
    return path


def read_patch_cache(path):
    path = Path(path)
    with path.open('rb') as handle:
        header = handle.read(HEADER.size)
        if len(header) != HEADER.size:
            raise FormatError(f'{path}: truncated patch cache header')
        magic, version, size, count = HEADER.unpack(header)
        if magic != MAGIC:
            raise FormatError(f'{path}: not a patch cache (bad magic)')
        if version != VERSION:
            raise FormatError(f'{path}: unsupported patch cache version {version}')

        payload_bytes = 4 * size * size
        patches = []
        for index in range(count):
            meta = handle.read(RECORD.size)
            payload = handle.read(payload_bytes)
            if len(meta) != RECORD.size or len(payload) != payload_bytes:
                raise FormatError(f'{path}: truncated at record {index}')
            raw_id, x, y, label = RECORD.unpack(meta)
            pixels = np.frombuffer(payload, dtype='<f4').astype(np.float32).reshape(size, size)
            patches.append(PatchRecord(
                painting_id=raw_id.rstrip(b'\x00').decode('utf-8'), x=x, y=y, size=size,
                label=None if label == UNLABELED else PatchLabel(label), pixels=pixels,
            ))
    return patches
