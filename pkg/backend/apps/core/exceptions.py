"""
Brushmark exception hierarchy.

Kept in its own module so every app can import it without circular imports.
Management commands turn any BrushmarkError into a CommandError with exit
code 1.
"""


class BrushmarkError(Exception):
    """Base class for all domain errors."""


class ShapeError(BrushmarkError, ValueError):
    """Tensor or image dimensions do not fit the operation."""


class ConfigurationError(BrushmarkError, ValueError):
    """A configuration value is outside its allowed range."""


class UsageError(BrushmarkError, ValueError):
    """An operation was called with inputs its contract does not accept."""


class FormatError(BrushmarkError, ValueError):
    """A file decodes but its layout or bit depth is not supported."""


class ImageReadError(BrushmarkError, OSError):
    """An image file is missing, unreadable or corrupt."""

    def __init__(self, path, reason):
        self.path = str(path)
        self.reason = reason
        super().__init__(f'Cannot read image {self.path}: {reason}')


class NumericError(BrushmarkError, ArithmeticError):
    """A value became NaN or infinite."""


class DivergenceError(NumericError):
    """Training loss became non-finite."""

    def __init__(self, epoch, batch, loss):
        self.epoch = epoch
        self.batch = batch
        self.loss = loss
        super().__init__(f'Training diverged at epoch {epoch}, batch {batch} (loss={loss})')


class LeakageError(BrushmarkError):
    """Training and held-out splits share painting ids."""

    def __init__(self, overlap):
        self.overlap = sorted(overlap)
        super().__init__(
            f'Painting ids present in both training and held-out splits: {", ".join(self.overlap)}'
        )
