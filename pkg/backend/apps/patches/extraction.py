"""
Grid tiling and Blank/Human/Robot labeling.

Patches sit on a regular grid with offsets {0, stride, 2*stride, ...};
tiles that would cross the right or bottom border are dropped.
"""

import logging
from dataclasses import dataclass, replace

import numpy as np

from apps.core.exceptions import ConfigurationError
from apps.patches.labels import Author, PatchLabel

logger = logging.getLogger(__name__)

DEFAULT_PATCH_SIZE = 300
DEFAULT_STRIDE = 150
WHITE_LEVEL = 0.98
BLANK_FRACTION = 0.95


@dataclass
class PatchRecord:
    """
    One square tile of a painting.

    Attributes:
        painting_id: Source painting
        x, y: Top-left pixel offset in the source image
        size: Side length in pixels
        label: PatchLabel, or None for hybrid paintings
        pixels: float array [size, size]
    """
    painting_id: str
    x: int
    y: int
    size: int
    label: PatchLabel = None
    pixels: np.ndarray = None

    @property
    def key(self):
        return (self.painting_id, self.x, self.y)


def validate_grid(size, stride):
    if size < 1:
        raise ConfigurationError(f'patch size must be >= 1, got {size}')
    if not 1 <= stride <= size:
        raise ConfigurationError(f'stride must lie in [1, {size}], got {stride}')


def grid_positions(width, height, size=DEFAULT_PATCH_SIZE, stride=DEFAULT_STRIDE):
    """Top-left (x, y) offsets of every whole tile, row by row."""
    validate_grid(size, stride)
    if width < size or height < size:
        return []
    xs = range(0, width - size + 1, stride)
    ys = range(0, height - size + 1, stride)
    return [(x, y) for y in ys for x in xs]


def extract_patches(image, size=DEFAULT_PATCH_SIZE, stride=DEFAULT_STRIDE):
    """
    Tile a GrayImage into unlabeled PatchRecords.

    Returns:
        list: (floor((W-size)/stride)+1) * (floor((H-size)/stride)+1) records,
        or an empty list when the image is smaller than one tile
    """
    positions = grid_positions(image.width, image.height, size, stride)
    return [
        PatchRecord(
            painting_id=image.painting_id, x=x, y=y, size=size,
            pixels=image.pixels[y:y + size, x:x + size].copy(),
        )
        for x, y in positions
    ]


def white_fraction(pixels):
    return float(np.mean(np.asarray(pixels) >= WHITE_LEVEL))


def label_patch(patch, painting_author):
    """
    Blank if at least 95% of pixels are white (>= 0.98), else the author label.

    Args:
        patch: PatchRecord or pixel array
        painting_author: Author.HUMAN or Author.ROBOT

    Raises:
        UsageError: painting_author is hybrid
    """
    author_label = PatchLabel.for_author(painting_author)
    pixels = patch.pixels if isinstance(patch, PatchRecord) else patch
    if white_fraction(pixels) >= BLANK_FRACTION:
        return PatchLabel.BLANK
    return author_label


def extract_labeled_patches(image, size=DEFAULT_PATCH_SIZE, stride=DEFAULT_STRIDE):
    """Tile and label a painting; hybrid paintings keep label None."""
    patches = extract_patches(image, size, stride)
    if image.author is None or image.author is Author.HYBRID:
        return patches
    labeled = [replace(patch, label=label_patch(patch, image.author)) for patch in patches]
    logger.debug(
        '%s: %d patches (%d blank)', image.painting_id, len(labeled),
        sum(1 for patch in labeled if patch.label is PatchLabel.BLANK),
    )
    return labeled


def label_counts(patches):
    """Per-class patch counts in class order (Blank, Human, Robot)."""
    counts = np.zeros(len(PatchLabel), dtype=np.int64)
    for patch in patches:
        if patch.label is not None:
            counts[int(patch.label)] += 1
    return counts


def stack_pixels(patches, dtype=np.float32):
    """[N, 1, S, S] batch array from a list of PatchRecords."""
    if not patches:
        return np.zeros((0, 1, 0, 0), dtype=dtype)
    return np.stack([patch.pixels for patch in patches]).astype(dtype)[:, None, :, :]
