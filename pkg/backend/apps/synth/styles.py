"""
Stroke styles for the synthetic corpus.

Human-like strokes are long, curved and tapered; robot-like strokes are
short straight segments placed on a jittered grid with near-constant width.
Pixel-valued parameters are given for a 900 x 900 canvas and can be scaled
for smaller test canvases.
"""

from dataclasses import dataclass, replace
from enum import Enum

from apps.core.exceptions import ConfigurationError
from apps.patches.labels import Author

REFERENCE_SIZE = 900


class Style(str, Enum):
    HUMAN_LIKE = 'human_like'
    ROBOT_LIKE = 'robot_like'

    @property
    def author(self):
        return Author.HUMAN if self is Style.HUMAN_LIKE else Author.ROBOT


@dataclass(frozen=True)
class StyleParams:
    style: Style
    stroke_count: tuple
    steps: tuple
    step_length: float
    curvature_std: float
    radius: tuple
    width_std: float
    taper: bool
    intensity: tuple
    grid_spacing: float = 0.0
    grid_jitter: float = 0.0

    def __post_init__(self):
        lo, hi = self.stroke_count
        if lo < 0 or hi < lo:
            raise ConfigurationError(f'stroke_count must be a range 0 <= lo <= hi, got {self.stroke_count}')
        if self.steps[0] < 1 or self.steps[1] < self.steps[0]:
            raise ConfigurationError(f'steps must be a range 1 <= lo <= hi, got {self.steps}')
        if self.radius[0] <= 0 or self.radius[1] < self.radius[0]:
            raise ConfigurationError(f'radius must be a positive range, got {self.radius}')
        if not 0.0 <= self.intensity[0] <= self.intensity[1] < 0.98:
            raise ConfigurationError(f'intensity must lie below the white level, got {self.intensity}')
        if self.style is Style.ROBOT_LIKE and self.grid_spacing <= 0:
            raise ConfigurationError('robot-like strokes need a positive grid_spacing')

    @property
    def author(self):
        return self.style.author

    @classmethod
    def human(cls):
        return cls(
            style=Style.HUMAN_LIKE, stroke_count=(110, 150), steps=(30, 50), step_length=6.0,
            curvature_std=0.25, radius=(4.0, 8.0), width_std=1.5, taper=True, intensity=(0.1, 0.6),
        )

    @classmethod
    def robot(cls):
        return cls(
            style=Style.ROBOT_LIKE, stroke_count=(700, 900), steps=(4, 7), step_length=6.0,
            curvature_std=0.01, radius=(3.5, 4.0), width_std=0.15, taper=False, intensity=(0.1, 0.6),
            grid_spacing=30.0, grid_jitter=3.0,
        )

    @classmethod
    def for_author(cls, author):
        return cls.human() if Author.parse(author) is Author.HUMAN else cls.robot()

    def scaled(self, factor):
        """
        Same style for a canvas factor times the reference size.

        Lengths and radii scale linearly and stroke counts stay, so the painted
        fraction of the canvas is kept.
        """
        if factor <= 0:
            raise ConfigurationError(f'scale factor must be positive, got {factor}')
        return replace(
            self,
            step_length=self.step_length * factor,
            radius=(max(self.radius[0] * factor, 0.75), max(self.radius[1] * factor, 0.75)),
            width_std=self.width_std * factor,
            grid_spacing=self.grid_spacing * factor,
            grid_jitter=self.grid_jitter * factor,
        )

    def for_size(self, size):
        return self if size == REFERENCE_SIZE else self.scaled(size / REFERENCE_SIZE)
