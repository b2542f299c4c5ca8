"""
Training-time augmentation of square grayscale patches.

Transforms run in a fixed order, each independently with probability
apply_prob: horizontal flip, vertical flip, rotation, random resized crop,
Gaussian blur, padded random crop. Geometric transforms sample bilinearly
and fill exposed area with white (1.0). Output shape always equals input
shape and values stay in [0, 1].
"""

from dataclasses import asdict, dataclass

import numpy as np
from scipy import ndimage

from apps.core.exceptions import ConfigurationError, ShapeError

WHITE = 1.0


@dataclass
class AugmentationConfig:
    rotation_deg: float = 15.0
    flip_h: bool = True
    flip_v: bool = True
    rrc_scale: tuple = (0.8, 1.0)
    blur_kernel: int = 3
    blur_sigma: float = 0.8
    crop_pad: int = 10
    apply_prob: float = 0.5
    seed: int = 0

    def __post_init__(self):
        low, high = self.rrc_scale
        self.rrc_scale = (float(low), float(high))
        if not 0.0 < low <= high <= 1.0:
            raise ConfigurationError(f'rrc_scale must satisfy 0 < low <= high <= 1, got {self.rrc_scale}')
        if self.blur_kernel < 1 or self.blur_kernel % 2 == 0:
            raise ConfigurationError(f'blur_kernel must be odd and >= 1, got {self.blur_kernel}')
        if self.blur_sigma <= 0:
            raise ConfigurationError(f'blur_sigma must be positive, got {self.blur_sigma}')
        if not 0.0 <= self.apply_prob <= 1.0:
            raise ConfigurationError(f'apply_prob must lie in [0, 1], got {self.apply_prob}')
        if self.rotation_deg < 0 or self.crop_pad < 0:
            raise ConfigurationError('rotation_deg and crop_pad must be non-negative')

    def to_dict(self):
        data = asdict(self)
        data['rrc_scale'] = list(self.rrc_scale)
        return data

    @classmethod
    def from_dict(cls, data):
        return cls(**{**data, 'rrc_scale': tuple(data.get('rrc_scale', (0.8, 1.0)))})


def rotate(pixels, angle_deg):
    """
    Rotate about the patch center; positive angles turn counter-clockwise
    as displayed (x to the right, y downward).
    """
    n_rows, n_cols = pixels.shape
    theta = np.deg2rad(angle_deg)
    cos, sin = np.cos(theta), np.sin(theta)
    cy, cx = (n_rows - 1) / 2.0, (n_cols - 1) / 2.0
    rows, cols = np.mgrid[0:n_rows, 0:n_cols].astype(np.float64)
    dx, dy = cols - cx, rows - cy
    src_cols = cx + cos * dx - sin * dy
    src_rows = cy + sin * dx + cos * dy
    return ndimage.map_coordinates(pixels, [src_rows, src_cols], order=1, mode='constant', cval=WHITE)


def resized_crop(pixels, top, left, side):
    """Bilinearly rescale the square crop [top:top+side, left:left+side] to the full patch size."""
    n = pixels.shape[0]
    centers = (np.arange(n) + 0.5) * side / n - 0.5
    coords = np.clip(centers, 0.0, side - 1.0)
    rows, cols = np.meshgrid(top + coords, left + coords, indexing='ij')
    return ndimage.map_coordinates(pixels, [rows, cols], order=1, mode='nearest')


def gaussian_kernel(size, sigma):
    offsets = np.arange(size) - size // 2
    weights = np.exp(-(offsets ** 2) / (2.0 * sigma ** 2))
    return weights / weights.sum()


def gaussian_blur(pixels, size, sigma):
    kernel = gaussian_kernel(size, sigma)
    blurred = ndimage.convolve1d(pixels, kernel, axis=0, mode='reflect')
    return ndimage.convolve1d(blurred, kernel, axis=1, mode='reflect')


def padded_crop(pixels, pad, top, left):
    n_rows, n_cols = pixels.shape
    padded = np.pad(pixels, pad, mode='constant', constant_values=WHITE)
    return padded[top:top + n_rows, left:left + n_cols]


def augment(pixels, config, rng):
    """
    Apply the enabled transforms to one square patch.

    Args:
        pixels: float array [S, S]
        config: AugmentationConfig
        rng: numpy Generator (one stream per patch, see apps.core.seeding.patch_rng)

    Returns:
        New float array [S, S] in [0, 1]
    """
    pixels = np.asarray(pixels, dtype=np.float64)
    if pixels.ndim != 2 or pixels.shape[0] != pixels.shape[1]:
        raise ShapeError(f'augment expects a square 2-D patch, got shape {pixels.shape}')
    out = pixels
    p = config.apply_prob
    n = pixels.shape[0]

    if config.flip_h and rng.random() < p:
        out = out[:, ::-1]
    if config.flip_v and rng.random() < p:
        out = out[::-1, :]
    if config.rotation_deg > 0 and rng.random() < p:
        out = rotate(out, rng.uniform(-config.rotation_deg, config.rotation_deg))
    low, high = config.rrc_scale
    if low < 1.0 and rng.random() < p:
        side = int(np.clip(round(n * np.sqrt(rng.uniform(low, high))), 1, n))
        top, left = rng.integers(0, n - side + 1, size=2)
        out = resized_crop(out, int(top), int(left), side)
    if config.blur_kernel > 1 and rng.random() < p:
        out = gaussian_blur(out, config.blur_kernel, config.blur_sigma)
    if config.crop_pad > 0 and rng.random() < p:
        top, left = rng.integers(0, 2 * config.crop_pad + 1, size=2)
        out = padded_crop(out, config.crop_pad, int(top), int(left))

    return np.clip(np.ascontiguousarray(out), 0.0, 1.0)
