"""
Binary checkpoint format.

Layout (all integers little-endian), see docs/CHECKPOINT_FORMAT.md:

    magic        4 bytes   b'BMCK'
    version      u8        1
    digest       32 bytes  sha256 of the canonical model config JSON
    epoch        u32
    val_accuracy f64
    fold_id      u16 length + UTF-8
    config       u32 length + UTF-8 JSON
    n_tensors    u32
    per tensor:
        name     u16 length + UTF-8
        ndim     u8
        dims     u32 * ndim
        payload  float32 * prod(dims)
"""

import hashlib
import io
import json
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from apps.core.exceptions import FormatError

logger = logging.getLogger(__name__)

MAGIC = b'BMCK'
VERSION = 1


def canonical_json(mapping):
    return json.dumps(mapping, sort_keys=True, separators=(',', ':'))


def config_digest(config):
    """sha256 digest (bytes) of the canonical JSON form of a config mapping."""
    return hashlib.sha256(canonical_json(config).encode('utf-8')).digest()


@dataclass
class CheckpointFile:
    """Decoded contents of a checkpoint file."""
    tensors: dict
    epoch: int
    val_accuracy: float
    fold_id: str
    config: dict
    digest: bytes = field(default=b'')


def _write_text(buffer, text, length_format):
    encoded = text.encode('utf-8')
    buffer.write(struct.pack(length_format, len(encoded)))
    buffer.write(encoded)


def _read_exact(buffer, size, what):
    chunk = buffer.read(size)
    if len(chunk) != size:
        raise FormatError(f'Checkpoint truncated while reading {what}')
    return chunk


def _read_text(buffer, length_format, what):
    (length,) = struct.unpack(length_format, _read_exact(buffer, struct.calcsize(length_format), what))
    return _read_exact(buffer, length, what).decode('utf-8')


def encode_checkpoint(tensors, epoch, val_accuracy, fold_id, config):
    """
    Serialize named arrays plus metadata to bytes.

    Args:
        tensors: Ordered mapping name -> numpy array (insertion order is kept)
        epoch: Epoch the parameters were captured at
        val_accuracy: Held-out accuracy at that epoch
        fold_id: Fold identifier (held-out painting id, or '' for full runs)
        config: JSON-serializable model config mapping
    """
    buffer = io.BytesIO()
    buffer.write(MAGIC)
    buffer.write(struct.pack('<B', VERSION))
    buffer.write(config_digest(config))
    buffer.write(struct.pack('<I', int(epoch)))
    buffer.write(struct.pack('<d', float(val_accuracy)))
    _write_text(buffer, fold_id or '', '<H')
    _write_text(buffer, canonical_json(config), '<I')
    buffer.write(struct.pack('<I', len(tensors)))
    for name, array in tensors.items():
        array = np.asarray(array)
        _write_text(buffer, name, '<H')
        buffer.write(struct.pack('<B', array.ndim))
        buffer.write(struct.pack(f'<{array.ndim}I', *array.shape))
        buffer.write(np.ascontiguousarray(array, dtype='<f4').tobytes())
    return buffer.getvalue()


def decode_checkpoint(payload):
    buffer = io.BytesIO(payload)
    if _read_exact(buffer, 4, 'magic') != MAGIC:
        raise FormatError('Not a checkpoint file (bad magic)')
    (version,) = struct.unpack('<B', _read_exact(buffer, 1, 'version'))
    if version != VERSION:
        raise FormatError(f'Unsupported checkpoint version {version}')
    digest = _read_exact(buffer, 32, 'digest')
    (epoch,) = struct.unpack('<I', _read_exact(buffer, 4, 'epoch'))
    (val_accuracy,) = struct.unpack('<d', _read_exact(buffer, 8, 'val_accuracy'))
    fold_id = _read_text(buffer, '<H', 'fold id')
    config = json.loads(_read_text(buffer, '<I', 'config'))
    if config_digest(config) != digest:
        raise FormatError('Checkpoint config digest does not match its config')
    (count,) = struct.unpack('<I', _read_exact(buffer, 4, 'tensor count'))

    tensors = {}
    for _ in range(count):
        name = _read_text(buffer, '<H', 'tensor name')
        (ndim,) = struct.unpack('<B', _read_exact(buffer, 1, f'{name} rank'))
        dims = struct.unpack(f'<{ndim}I', _read_exact(buffer, 4 * ndim, f'{name} dims'))
        size = int(np.prod(dims, dtype=np.int64)) if ndim else 1
        raw = _read_exact(buffer, 4 * size, f'{name} payload')
        tensors[name] = np.frombuffer(raw, dtype='<f4').astype(np.float32).reshape(dims)
    if buffer.read(1):
        raise FormatError('Trailing bytes after the last checkpoint tensor')
    return CheckpointFile(
        tensors=tensors, epoch=epoch, val_accuracy=val_accuracy,
        fold_id=fold_id, config=config, digest=digest,
    )


def save_checkpoint(path, tensors, epoch, val_accuracy, fold_id, config):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_checkpoint(tensors, epoch, val_accuracy, fold_id, config))
    logger.info('Saved checkpoint %s (epoch %s, val_accuracy %.4f)', path, epoch, val_accuracy)
    return path


def load_checkpoint(path):
    path = Path(path)
    try:
        payload = path.read_bytes()
    except OSError as exc:
        raise FormatError(f'Cannot read checkpoint {path}: {exc}') from exc
    return decode_checkpoint(payload)
