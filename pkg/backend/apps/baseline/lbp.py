"""
Local Binary Pattern texture histograms.

Each interior pixel is compared with its 8 neighbors, clockwise from the
top-left; a neighbor greater than or equal to the center sets its bit:

    1   2   4
    128 c   8
    64  32  16

The 256 codes are histogrammed and L1-normalized. Border pixels are skipped.
"""

from dataclasses import dataclass

import numpy as np

from apps.core.exceptions import UsageError

N_BINS = 256

# (dy, dx) in bit order
NEIGHBOR_OFFSETS = (
    (-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1),
)


@dataclass
class LBPHistogram:
    counts: np.ndarray

    @property
    def total(self):
        return int(self.counts.sum())

    @property
    def frequencies(self):
        return self.counts / max(self.total, 1)


def lbp_codes(pixels):
    """[H-2, W-2] array of 8-bit codes for the interior pixels."""
    pixels = np.asarray(pixels)
    if pixels.ndim != 2 or pixels.shape[0] < 3 or pixels.shape[1] < 3:
        raise UsageError(f'LBP needs a 2-D patch of at least 3x3, got shape {pixels.shape}')
    height, width = pixels.shape
    center = pixels[1:-1, 1:-1]
    codes = np.zeros(center.shape, dtype=np.uint8)
    for bit, (dy, dx) in enumerate(NEIGHBOR_OFFSETS):
        neighbor = pixels[1 + dy:height - 1 + dy, 1 + dx:width - 1 + dx]
        codes |= (neighbor >= center).astype(np.uint8) << bit
    return codes


def lbp_features(patch):
    """
    LBP histogram of a patch.

    Args:
        patch: 2-D pixel array or a PatchRecord with pixels
    """
    pixels = getattr(patch, 'pixels', patch)
    return LBPHistogram(np.bincount(lbp_codes(pixels).ravel(), minlength=N_BINS).astype(np.int64))


def feature_matrix(patches):
    """[N, 256] normalized histograms for a list of PatchRecords."""
    if not patches:
        return np.zeros((0, N_BINS))
    return np.stack([lbp_features(patch).frequencies for patch in patches])
