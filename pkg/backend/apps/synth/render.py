"""
Procedural stroke rendering.

A stroke is a polyline with a radius per vertex. It is rasterized by stamping
anti-aliased discs (coverage falls off linearly over one pixel at the edge)
along the resampled path, taking the maximum coverage within the stroke, and
composited over the canvas:

    canvas = canvas * (1 - coverage) + ink * coverage

Strokes are drawn lightest first so the darkest paint ends on top. The mask
records, per pixel, the last author whose stroke covered it by at least one
half (or, failing that, the author with the largest coverage), and is Blank
wherever the quantized image is white.
"""

import logging
from dataclasses import dataclass

import numpy as np

from apps.core.exceptions import ConfigurationError, UsageError
from apps.core.seeding import rng_for
from apps.patches.extraction import DEFAULT_PATCH_SIZE, WHITE_LEVEL
from apps.patches.images import GrayImage, quantize_8bit
from apps.patches.labels import Author, PatchLabel
from apps.synth.styles import Style

logger = logging.getLogger(__name__)

SIDES = ('left', 'right', 'top', 'bottom')
STRONG_COVERAGE = 0.5
HISTORY_BITS = {Author.HUMAN: 1, Author.ROBOT: 2}


@dataclass(frozen=True)
class Stroke:
    points: np.ndarray
    radii: np.ndarray
    ink: float
    author: Author


@dataclass
class SyntheticPainting:
    """
    Attributes:
        image: quantized GrayImage
        mask: uint8 [H, W] PatchLabel per pixel
        history: uint8 [H, W] bit set of authors that ever covered the pixel
            (1 human, 2 robot)
        seed: generation seed
        styles: style names that painted the canvas
    """
    image: GrayImage
    mask: np.ndarray
    history: np.ndarray
    seed: int
    styles: tuple

    @property
    def painted_fraction(self):
        return float(np.mean(self.mask != PatchLabel.BLANK))

    @property
    def overlap_fraction(self):
        return float(np.mean(self.history == 3))


@dataclass(frozen=True)
class Canvas:
    """Paintable area: the canvas minus one blank side band."""
    size: int
    side: str
    band: int

    @property
    def bounds(self):
        """(x0, y0, x1, y1) of the paintable area, half-open."""
        x0, y0, x1, y1 = 0, 0, self.size, self.size
        if self.side == 'left':
            x0 = self.band
        elif self.side == 'right':
            x1 = self.size - self.band
        elif self.side == 'top':
            y0 = self.band
        else:
            y1 = self.size - self.band
        return x0, y0, x1, y1

    @property
    def split_axis(self):
        """Axis along which hybrid territories are laid out (0 = y, 1 = x)."""
        return 0 if self.side in ('left', 'right') else 1

    @classmethod
    def choose(cls, size, rng):
        return cls(size=size, side=SIDES[int(rng.integers(len(SIDES)))], band=size // 3)


def _start_bounds(canvas, share=None):
    """Bounds for stroke starts; share=(lo, hi) restricts the split axis to a fraction."""
    x0, y0, x1, y1 = canvas.bounds
    if share is None:
        return x0, y0, x1, y1
    lo, hi = share
    if canvas.split_axis == 1:
        width = x1 - x0
        return x0 + lo * width, y0, x0 + hi * width, y1
    height = y1 - y0
    return x0, y0 + lo * height, x1, y0 + hi * height


def _radius_profile(params, count, rng):
    base = rng.uniform(*params.radius)
    radii = base + rng.normal(0.0, params.width_std, count)
    if params.taper and count > 1:
        t = np.linspace(0.0, 1.0, count)
        radii = radii * (0.35 + 0.65 * np.sin(np.pi * t))
    return np.clip(radii, 0.5, None)


def _human_stroke(params, bounds, rng):
    x0, y0, x1, y1 = bounds
    count = int(rng.integers(params.steps[0], params.steps[1] + 1))
    heading = rng.uniform(0.0, 2 * np.pi)
    turns = np.cumsum(rng.normal(0.0, params.curvature_std, count - 1))
    headings = heading + np.concatenate([[0.0], turns])[:-1] if count > 1 else np.array([heading])
    steps = params.step_length * np.stack([np.cos(headings), np.sin(headings)], axis=1)
    start = np.array([rng.uniform(x0, x1), rng.uniform(y0, y1)])
    points = start + np.concatenate([[[0.0, 0.0]], np.cumsum(steps, axis=0)])[:count]
    return points, _radius_profile(params, count, rng)


def _robot_stroke(params, bounds, rng):
    x0, y0, x1, y1 = bounds
    spacing = params.grid_spacing
    columns = max(int((x1 - x0) // spacing), 1)
    rows = max(int((y1 - y0) // spacing), 1)
    node = np.array([
        x0 + (int(rng.integers(columns)) + 0.5) * spacing,
        y0 + (int(rng.integers(rows)) + 0.5) * spacing,
    ])
    start = node + rng.normal(0.0, params.grid_jitter, 2)
    count = int(rng.integers(params.steps[0], params.steps[1] + 1))
    heading = int(rng.integers(4)) * np.pi / 4 + rng.normal(0.0, params.curvature_std)
    direction = np.array([np.cos(heading), np.sin(heading)])
    points = start + np.arange(count)[:, None] * params.step_length * direction
    return points, _radius_profile(params, count, rng)


def plan_strokes(params, canvas, count, rng, share=None):
    bounds = _start_bounds(canvas, share)
    make = _human_stroke if params.style is Style.HUMAN_LIKE else _robot_stroke
    strokes = []
    for _ in range(count):
        points, radii = make(params, bounds, rng)
        strokes.append(Stroke(points, radii, float(rng.uniform(*params.intensity)), params.author))
    return strokes


def _resample(points, radii):
    """Stamp centers spaced at most half a radius apart."""
    centers, stamp_radii = [points[:1]], [radii[:1]]
    for i in range(1, len(points)):
        length = float(np.linalg.norm(points[i] - points[i - 1]))
        spacing = max(0.5 * min(radii[i - 1], radii[i]), 0.5)
        n = max(int(np.ceil(length / spacing)), 1)
        t = np.arange(1, n + 1) / n
        centers.append(points[i - 1] + t[:, None] * (points[i] - points[i - 1]))
        stamp_radii.append(radii[i - 1] + t * (radii[i] - radii[i - 1]))
    return np.concatenate(centers), np.concatenate(stamp_radii)


def stroke_coverage(stroke, size, region):
    """
    Coverage of one stroke within its bounding box.

    Returns:
        (y0, x0, coverage) with coverage a float array, or None when the stroke
        misses the paintable region
    """
    centers, radii = _resample(stroke.points, stroke.radii)
    reach = radii.max() + 1.0
    rx0, ry0, rx1, ry1 = region
    bx0 = max(int(np.floor(centers[:, 0].min() - reach)), rx0)
    by0 = max(int(np.floor(centers[:, 1].min() - reach)), ry0)
    bx1 = min(int(np.ceil(centers[:, 0].max() + reach)) + 1, rx1, size)
    by1 = min(int(np.ceil(centers[:, 1].max() + reach)) + 1, ry1, size)
    if bx0 >= bx1 or by0 >= by1:
        return None

    coverage = np.zeros((by1 - by0, bx1 - bx0))
    for (cx, cy), radius in zip(centers, radii):
        sx0, sx1 = max(int(cx - radius - 1), bx0), min(int(cx + radius + 2), bx1)
        sy0, sy1 = max(int(cy - radius - 1), by0), min(int(cy + radius + 2), by1)
        if sx0 >= sx1 or sy0 >= sy1:
            continue
        ys, xs = np.mgrid[sy0:sy1, sx0:sx1]
        distance = np.hypot(xs + 0.5 - cx, ys + 0.5 - cy)
        disc = np.clip(radius + 0.5 - distance, 0.0, 1.0)
        window = coverage[sy0 - by0:sy1 - by0, sx0 - bx0:sx1 - bx0]
        np.maximum(window, disc, out=window)
    return by0, bx0, coverage


def render(strokes, canvas):
    """Composite strokes (lightest first) and derive mask and history."""
    size = canvas.size
    pixels = np.ones((size, size))
    author_map = np.zeros((size, size), dtype=np.uint8)
    strong = np.zeros((size, size), dtype=bool)
    weak = np.zeros((size, size))
    history = np.zeros((size, size), dtype=np.uint8)

    for stroke in sorted(strokes, key=lambda s: -s.ink):
        placed = stroke_coverage(stroke, size, canvas.bounds)
        if placed is None:
            continue
        y0, x0, coverage = placed
        area = (slice(y0, y0 + coverage.shape[0]), slice(x0, x0 + coverage.shape[1]))
        pixels[area] = pixels[area] * (1.0 - coverage) + stroke.ink * coverage

        label = int(PatchLabel.for_author(stroke.author))
        is_strong = coverage >= STRONG_COVERAGE
        is_weak = ~strong[area] & ~is_strong & (coverage > weak[area])
        author_map[area] = np.where(is_strong | is_weak, label, author_map[area])
        weak[area] = np.where(is_weak, coverage, weak[area])
        strong[area] |= is_strong
        history[area] |= np.where(is_strong, HISTORY_BITS[stroke.author], 0).astype(np.uint8)

    pixels = quantize_8bit(pixels)
    mask = np.where(pixels < WHITE_LEVEL, author_map, PatchLabel.BLANK).astype(np.uint8)
    return pixels, mask, history


def _check_size(size, patch_size):
    if size < patch_size:
        raise ConfigurationError(f'canvas size {size} is smaller than the patch size {patch_size}')


def _stroke_count(params, rng):
    return int(rng.integers(params.stroke_count[0], params.stroke_count[1] + 1))


def generate_pure(style, size=900, seed=0, painting_id='', patch_size=DEFAULT_PATCH_SIZE):
    """
    One single-author painting; identical for identical (style, size, seed).

    Raises:
        ConfigurationError: size below the patch size
    """
    _check_size(size, patch_size)
    rng = rng_for('synth', seed)
    canvas = Canvas.choose(size, rng)
    strokes = plan_strokes(style, canvas, _stroke_count(style, rng), rng)
    pixels, mask, history = render(strokes, canvas)
    logger.debug('%s: %d %s strokes, painted fraction %.3f', painting_id, len(strokes), style.style.value, np.mean(mask > 0))
    return SyntheticPainting(
        image=GrayImage(pixels, painting_id, style.author), mask=mask, history=history,
        seed=seed, styles=(style.style.value,),
    )


def generate_hybrid(style_a, style_b, size=900, seed=0, mix=0.5, painting_id='', patch_size=DEFAULT_PATCH_SIZE):
    """
    Interleaved strokes of two styles on one canvas.

    mix is style_a's share of its usual stroke count (style_b paints 1 - mix
    of its own). The two styles start their strokes in overlapping
    territories along the canvas, so a band in the middle holds both.

    Raises:
        UsageError: mix outside (0, 1), or both styles of one author
    """
    if not 0.0 < mix < 1.0:
        raise UsageError(f'mix must lie strictly between 0 and 1, got {mix}; use generate_pure for one author')
    if style_a.author is style_b.author:
        raise UsageError('A hybrid painting needs one human-like and one robot-like style')
    _check_size(size, patch_size)
    rng = rng_for('synth', seed)
    canvas = Canvas.choose(size, rng)
    count_a = max(round(mix * _stroke_count(style_a, rng)), 1)
    count_b = max(round((1.0 - mix) * _stroke_count(style_b, rng)), 1)
    strokes = (
        plan_strokes(style_a, canvas, count_a, rng, share=(0.0, 0.65))
        + plan_strokes(style_b, canvas, count_b, rng, share=(0.35, 1.0))
    )
    styles = (style_a.style.value, style_b.style.value)
    pixels, mask, history = render(strokes, canvas)
    return SyntheticPainting(
        image=GrayImage(pixels, painting_id, Author.HYBRID), mask=mask, history=history,
        seed=seed, styles=styles,
    )
