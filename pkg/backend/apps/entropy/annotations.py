"""
Annotated hybrid regions.

An annotation file is JSON Lines, one rectangle per line:

    {"painting_id": "hybrid_painting_1", "x0": 300, "y0": 150, "x1": 600, "y1": 450}

Bounds are half-open scan pixels. A grid patch counts as annotated when at
least half of its area lies inside the union of its painting's regions.
"""

import logging
from collections import OrderedDict
from dataclasses import asdict, dataclass

import numpy as np
from django.core.exceptions import ValidationError

from apps.entropy.serializers import AnnotationRegionSerializer
from apps.patches.extraction import DEFAULT_PATCH_SIZE, DEFAULT_STRIDE, grid_positions
from apps.patches.manifest import read_jsonl, write_jsonl

logger = logging.getLogger(__name__)

MIN_OVERLAP = 0.5


@dataclass(frozen=True)
class AnnotationRegion:
    painting_id: str
    x0: int
    y0: int
    x1: int
    y1: int

    def __post_init__(self):
        if self.x0 < 0 or self.y0 < 0 or self.x0 >= self.x1 or self.y0 >= self.y1:
            raise ValidationError(f'Invalid annotation region {self.describe()}')

    def describe(self):
        return f'{self.painting_id} ({self.x0}, {self.y0}, {self.x1}, {self.y1})'

    @property
    def area(self):
        return (self.x1 - self.x0) * (self.y1 - self.y0)

    def check_bounds(self, width, height):
        if self.x1 > width or self.y1 > height:
            raise ValidationError(
                f'Annotation region {self.describe()} lies outside the {width}x{height} image'
            )


def read_annotations(path):
    return [AnnotationRegion(**row) for row in read_jsonl(path, AnnotationRegionSerializer, 'annotation')]


def write_annotations(path, regions):
    return write_jsonl(path, [asdict(region) for region in regions])


def regions_by_painting(regions):
    grouped = OrderedDict()
    for region in regions:
        grouped.setdefault(region.painting_id, []).append(region)
    return grouped


def union_mask(regions, width, height, clip=False):
    """Boolean [height, width] mask of the union of regions (bounds checked unless clip)."""
    mask = np.zeros((height, width), dtype=bool)
    for region in regions:
        if not clip:
            region.check_bounds(width, height)
        mask[region.y0:region.y1, region.x0:region.x1] = True
    return mask


def annotated_coords(mask, coords, size, min_overlap=MIN_OVERLAP):
    """Coordinates whose size x size patch is covered by mask to at least min_overlap."""
    # summed-area table so each patch costs four lookups
    table = np.zeros((mask.shape[0] + 1, mask.shape[1] + 1), dtype=np.int64)
    table[1:, 1:] = mask.cumsum(axis=0).cumsum(axis=1)
    needed = min_overlap * size * size
    selected = []
    for x, y in coords:
        x1 = min(x + size, mask.shape[1])
        y1 = min(y + size, mask.shape[0])
        covered = table[y1, x1] - table[y, x1] - table[y1, x] + table[y, x]
        if covered >= needed:
            selected.append((x, y))
    return selected


def select_annotated_patches(image, regions, size=DEFAULT_PATCH_SIZE, stride=DEFAULT_STRIDE,
                             min_overlap=MIN_OVERLAP):
    """
    Grid patches of image (same grid as extract_patches) that are annotated.

    Args:
        image: GrayImage the regions were drawn on
        regions: AnnotationRegions of that painting

    Returns:
        list: (x, y) top-left coordinates in grid order

    Raises:
        ValidationError: a region extends past the image bounds
    """
    mask = union_mask(regions, image.width, image.height)
    coords = grid_positions(image.width, image.height, size, stride)
    selected = annotated_coords(mask, coords, size, min_overlap)
    logger.debug('%s: %d of %d patches annotated', image.painting_id, len(selected), len(coords))
    return selected


def select_annotated_rows(rows, regions, min_overlap=MIN_OVERLAP):
    """
    Filter posterior rows of one painting to the annotated patches.

    The extent is taken from the patch grid itself; region parts beyond the
    last patch cover nothing and are clipped.
    """
    if not rows:
        return []
    width = max(row['x'] + row['size'] for row in rows)
    height = max(row['y'] + row['size'] for row in rows)
    mask = union_mask(regions, width, height, clip=True)
    keep = set()
    for size in {row['size'] for row in rows}:
        coords = [(row['x'], row['y']) for row in rows if row['size'] == size]
        keep.update((x, y, size) for x, y in annotated_coords(mask, coords, size, min_overlap))
    return [row for row in rows if (row['x'], row['y'], row['size']) in keep]
