"""
Raster I/O for scanned canvases.

Images are read with Pillow and converted to float64 grayscale in [0, 1].
Color inputs use the luminance weights 0.299 R + 0.587 G + 0.114 B, computed
in floating point (Pillow's own 'L' conversion rounds to 8 bits).
"""

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from apps.core.exceptions import FormatError, ImageReadError, ShapeError
from apps.patches.labels import Author

logger = logging.getLogger(__name__)

LUMINANCE = np.array([0.299, 0.587, 0.114])

# Mode -> maximum raw value
GRAY_MODES = {
    '1': 1.0,
    'L': 255.0,
    'I;16': 65535.0,
    'I;16B': 65535.0,
    'I;16L': 65535.0,
}
COLOR_MODES = ('RGB', 'RGBA', 'RGBX', 'LA', 'P', 'PA')


@dataclass
class GrayImage:
    """
    Grayscale canvas.

    Attributes:
        pixels: float64 array [height, width], values in [0, 1]
        painting_id: Identifier used for grouping patches into folds
        author: Author of the painting (None when unknown)
    """
    pixels: np.ndarray
    painting_id: str = ''
    author: Author = None

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=np.float64)
        if self.pixels.ndim != 2 or min(self.pixels.shape) < 1:
            raise ShapeError(f'GrayImage needs a non-empty 2-D array, got shape {self.pixels.shape}')
        if not np.all((self.pixels >= 0.0) & (self.pixels <= 1.0)):
            raise FormatError(f'GrayImage {self.painting_id!r} has intensities outside [0, 1]')
        if self.author is not None:
            self.author = Author.parse(self.author)

    @property
    def height(self):
        return self.pixels.shape[0]

    @property
    def width(self):
        return self.pixels.shape[1]


def _to_gray(image, path):
    mode = image.mode
    if mode in GRAY_MODES:
        return np.asarray(image, dtype=np.float64) / GRAY_MODES[mode]
    if mode == 'I':
        # 16-bit PNG/PGM files decode as 32-bit 'I' on some Pillow versions
        raw = np.asarray(image, dtype=np.int64)
        if raw.min(initial=0) < 0 or raw.max(initial=0) > 65535:
            raise FormatError(f'{path}: 32-bit integer images are not supported')
        return raw.astype(np.float64) / 65535.0
    if mode in COLOR_MODES:
        rgb = np.asarray(image.convert('RGB'), dtype=np.float64) / 255.0
        return np.clip(rgb @ LUMINANCE, 0.0, 1.0)
    raise FormatError(f'{path}: unsupported image mode {mode!r}')


def load_image(path, painting_id='', author=None):
    """
    Load a PNG or PGM/PPM file as a GrayImage.

    Args:
        path: File to read
        painting_id: Defaults to the file stem
        author: Optional Author (or its string value)

    Raises:
        ImageReadError: File missing, unreadable or corrupt
        FormatError: Unsupported bit depth or mode
    """
    path = Path(path)
    try:
        with Image.open(path) as image:
            image.load()
            pixels = _to_gray(image, path)
    except FileNotFoundError:
        raise ImageReadError(path, 'file not found') from None
    except UnidentifiedImageError:
        raise ImageReadError(path, 'not a supported raster image') from None
    except FormatError:
        raise
    except (OSError, SyntaxError, ValueError) as exc:
        raise ImageReadError(path, str(exc)) from exc

    logger.debug('Loaded %s (%dx%d)', path, pixels.shape[1], pixels.shape[0])
    return GrayImage(pixels=pixels, painting_id=painting_id or path.stem, author=author)


def quantize_8bit(pixels):
    """Round intensities to the nearest of 256 levels."""
    return np.round(np.clip(pixels, 0.0, 1.0) * 255.0) / 255.0


def save_gray_png(path, pixels):
    """Write intensities in [0, 1] as an 8-bit grayscale PNG."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    levels = np.round(np.clip(pixels, 0.0, 1.0) * 255.0).astype(np.uint8)
    Image.fromarray(levels).save(path, format='PNG')
    return path


def save_label_png(path, mask):
    """Write a small-integer label mask (e.g. {0, 1, 2}) as a single-channel PNG."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(np.asarray(mask, dtype=np.uint8)).save(path, format='PNG')
    return path


def load_label_png(path):
    try:
        with Image.open(path) as image:
            return np.asarray(image, dtype=np.uint8).copy()
    except (OSError, UnidentifiedImageError) as exc:
        raise ImageReadError(path, str(exc)) from exc
