from dataclasses import dataclass, field

from apps.core.exceptions import ConfigurationError
from apps.patches.augment import AugmentationConfig
from apps.training.weights import DEFAULT_ALPHAS


@dataclass
class TrainConfig:
    """
    Optimization settings for one fold.

    augmentation=None disables augmentation entirely.
    """
    lr: float = 1e-4
    momentum: float = 0.9
    batch_size: int = 64
    epochs: int = 100
    seed: int = 0
    augmentation: AugmentationConfig = field(default_factory=AugmentationConfig)
    eval_every: int = 1
    alphas: tuple = DEFAULT_ALPHAS

    def __post_init__(self):
        self.alphas = tuple(float(a) for a in self.alphas)
        if self.lr <= 0 or self.epochs < 1 or self.eval_every < 1:
            raise ConfigurationError('lr, epochs and eval_every must be strictly positive')
        if self.batch_size < 2:
            raise ConfigurationError(f'batch_size must be at least 2 for batch norm, got {self.batch_size}')
        if not 0.0 < self.momentum < 1.0:
            raise ConfigurationError(f'momentum must lie in (0, 1), got {self.momentum}')
        if len(self.alphas) != 3 or min(self.alphas) <= 0:
            raise ConfigurationError(f'alphas must be three positive values, got {self.alphas}')

    def to_dict(self):
        return {
            'lr': self.lr, 'momentum': self.momentum, 'batch_size': self.batch_size,
            'epochs': self.epochs, 'seed': self.seed, 'eval_every': self.eval_every,
            'alphas': list(self.alphas),
            'augmentation': self.augmentation.to_dict() if self.augmentation else None,
        }

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        augmentation = data.pop('augmentation', None)
        return cls(
            **data,
            augmentation=AugmentationConfig.from_dict(augmentation) if augmentation else None,
        )
