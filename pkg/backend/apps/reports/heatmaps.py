"""
Patch-level heatmaps.

Per-patch values are spread over the pixels each patch covers and averaged
where patches overlap; pixels no patch covers (or only excluded patches
cover) have no value. Color maps:

    class    Blank white, Human blue, Robot red; overlapping predictions
             blend the class colors by their share of covering patches
    entropy  0 light yellow to 1 dark red (linear)
    no data  mid grey
"""

from pathlib import Path

import numpy as np
from PIL import Image

from apps.core.exceptions import UsageError
from apps.patches.labels import NUM_CLASSES

CLASS_COLORS = np.array([
    (255, 255, 255),
    (33, 102, 172),
    (178, 24, 43),
], dtype=np.float64)
ENTROPY_LOW = np.array((255, 247, 188), dtype=np.float64)
ENTROPY_HIGH = np.array((127, 0, 0), dtype=np.float64)
NO_DATA = np.array((160, 160, 160), dtype=np.float64)


def _dimensions(painting):
    if hasattr(painting, 'width'):
        return painting.width, painting.height
    width, height = painting
    return int(width), int(height)


def render_heatmap(painting, per_patch_values, grid):
    """
    Overlap-averaged field of per-patch values.

    Args:
        painting: GrayImage or (width, height)
        per_patch_values: One value per grid patch; None or NaN values are
            skipped. Values may be vectors (e.g. one-hot classes).
        grid: (coords, size) with coords the (x, y) top-left corners

    Returns:
        float array [height, width] (or [height, width, k] for vectors) with
        NaN where no patch contributes

    Raises:
        UsageError: grid and values differ in length, or a patch leaves the painting
    """
    width, height = _dimensions(painting)
    coords, size = grid
    coords = list(coords)
    values = list(per_patch_values)
    if len(coords) != len(values):
        raise UsageError(f'{len(coords)} grid patches but {len(values)} values')

    depth = None
    for value in values:
        if value is not None:
            depth = np.size(value)
            break
    shape = (height, width) if depth in (None, 1) else (height, width, depth)
    total = np.zeros(shape)
    count = np.zeros((height, width))
    for (x, y), value in zip(coords, values):
        if x < 0 or y < 0 or x + size > width or y + size > height:
            raise UsageError(f'patch at ({x}, {y}) of size {size} leaves the {width}x{height} painting')
        if value is None:
            continue
        value = np.asarray(value, dtype=np.float64)
        if np.isnan(value).any():
            continue
        total[y:y + size, x:x + size] += value.reshape(shape[2:]) if len(shape) == 3 else float(value)
        count[y:y + size, x:x + size] += 1

    with np.errstate(invalid='ignore', divide='ignore'):
        if len(shape) == 3:
            return total / count[..., None]
        return total / count


def class_field(painting, predictions, grid):
    """Per-pixel share of each class among covering patches, [H, W, 3]."""
    onehot = np.eye(NUM_CLASSES)[np.asarray(predictions, dtype=np.int64)]
    return render_heatmap(painting, list(onehot), grid)


def class_colors(field):
    rgb = field @ CLASS_COLORS
    missing = np.isnan(field).any(axis=-1)
    rgb[missing] = NO_DATA
    return np.round(rgb).astype(np.uint8)


def entropy_colors(field):
    value = np.clip(field, 0.0, 1.0)[..., None]
    rgb = ENTROPY_LOW + value * (ENTROPY_HIGH - ENTROPY_LOW)
    rgb[np.isnan(field)] = NO_DATA
    return np.round(rgb).astype(np.uint8)


def save_rgb_png(path, rgb):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(rgb).save(path, format='PNG')
    return path
