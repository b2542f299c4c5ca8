"""
Architecture configuration for the patch classifier.

The default is the five-block network used for 300x300 patches:

    block channels 32 -> 64 -> 128 -> 256 -> 512, two 3x3 convs per block
    spatial sizes  300 -> 150 -> 75 -> 37 -> 18 -> 9
    head           dropout(0.4) -> global average pool -> 512 -> 512 -> 128 -> 3
"""

from dataclasses import asdict, dataclass

from apps.core.exceptions import ConfigurationError
from apps.patches.labels import NUM_CLASSES

KERNEL_SIZE = 3

# --model-scale values; 'full' is accepted as another name for 'paper'
MODEL_SCALES = ('paper', 'full', 'tiny')
SCALE_ALIASES = {'full': 'paper'}


@dataclass(frozen=True)
class ModelConfig:
    block_channels: tuple = (32, 64, 128, 256, 512)
    convs_per_block: int = 2
    input_size: int = 300
    dropout_p: float = 0.4
    fc_dims: tuple = (512, 128)
    num_classes: int = NUM_CLASSES
    in_channels: int = 1

    def __post_init__(self):
        object.__setattr__(self, 'block_channels', tuple(int(c) for c in self.block_channels))
        object.__setattr__(self, 'fc_dims', tuple(int(d) for d in self.fc_dims))
        if not self.block_channels or min(self.block_channels) < 1:
            raise ConfigurationError('block_channels must be a non-empty list of positive counts')
        if self.convs_per_block < 1:
            raise ConfigurationError('convs_per_block must be >= 1')
        if any(d < 1 for d in self.fc_dims):
            raise ConfigurationError('fc_dims must be positive')
        if self.num_classes != NUM_CLASSES:
            raise ConfigurationError(f'num_classes must be {NUM_CLASSES} (Blank, Human, Robot)')
        if not 0.0 <= self.dropout_p < 1.0:
            raise ConfigurationError(f'dropout_p must lie in [0, 1), got {self.dropout_p}')
        minimum = 2 ** len(self.block_channels)
        if self.input_size < minimum:
            raise ConfigurationError(
                f'input_size {self.input_size} is too small for {len(self.block_channels)} pooling stages '
                f'(need >= {minimum})'
            )

    @classmethod
    def full(cls):
        return cls()

    @classmethod
    def tiny(cls, input_size=32):
        """Two narrow blocks for tests and quick desk runs."""
        return cls(block_channels=(8, 16), input_size=input_size, fc_dims=(16, 8))

    @classmethod
    def tiny_for_patches(cls, input_size=300):
        """Scaled-down preset for full-size patches (the CLI's --model-scale tiny)."""
        return cls(block_channels=(8, 16, 32, 32), input_size=input_size, fc_dims=(32, 16))

    @classmethod
    def for_scale(cls, scale, input_size):
        scale = normalize_scale(scale)
        if scale == 'paper':
            return cls(input_size=input_size)
        return cls.tiny_for_patches(input_size)

    def to_dict(self):
        data = asdict(self)
        data['block_channels'] = list(self.block_channels)
        data['fc_dims'] = list(self.fc_dims)
        return data

    @classmethod
    def from_dict(cls, data):
        return cls(**data)


def trace_shapes(config):
    """Spatial size at the input and after every block (floor halving)."""
    sizes = [config.input_size]
    for _ in config.block_channels:
        sizes.append(sizes[-1] // 2)
    return sizes


def conv_params(in_channels, out_channels):
    return in_channels * out_channels * KERNEL_SIZE * KERNEL_SIZE + out_channels


def batchnorm_params(channels):
    return 2 * channels


def linear_params(in_features, out_features):
    return in_features * out_features + out_features


def conv_block_params(in_channels, out_channels, convs=2):
    total = 0
    for index in range(convs):
        total += conv_params(in_channels if index == 0 else out_channels, out_channels)
        total += batchnorm_params(out_channels)
    return total


def count_params(config):
    """Trainable parameters: conv weights and biases, bn gamma/beta, fc weights and biases."""
    total = 0
    channels = config.in_channels
    for out_channels in config.block_channels:
        total += conv_block_params(channels, out_channels, config.convs_per_block)
        channels = out_channels
    widths = [channels, *config.fc_dims, config.num_classes]
    for in_features, out_features in zip(widths, widths[1:]):
        total += linear_params(in_features, out_features)
    return total


def normalize_scale(scale):
    """Canonical --model-scale value ('paper' or 'tiny')."""
    value = str(scale).strip().lower()
    if value not in MODEL_SCALES:
        raise ConfigurationError(f'Unknown model scale {scale!r}; expected one of {", ".join(MODEL_SCALES)}')
    return SCALE_ALIASES.get(value, value)
