"""
Run configuration resolution.

Values are resolved per key in increasing precedence:

    FALLBACK_CONFIG  <  --config file (KEY=value lines)  <  command-line flags

The config file is read with python-decouple's RepositoryEnv; keys are
UPPER_SNAKE_CASE versions of the flag names (--patch-size -> PATCH_SIZE).
The resolved mapping and the input paths are echoed into every report.
"""

import logging
from collections import OrderedDict
from dataclasses import dataclass, field

from decouple import Csv, RepositoryEnv, strtobool
from django.conf import settings

from apps.baseline.forest import ForestConfig
from apps.core.exceptions import ConfigurationError
from apps.network.config import ModelConfig, normalize_scale
from apps.patches.augment import AugmentationConfig
from apps.tensor.checkpoint import config_digest
from apps.training.config import TrainConfig

logger = logging.getLogger(__name__)


def _bool(value):
    return value if isinstance(value, bool) else bool(strtobool(str(value)))


def _floats(value):
    if isinstance(value, (list, tuple)):
        return [float(v) for v in value]
    return Csv(cast=float)(value)


def _scale(value):
    return normalize_scale(value)


FALLBACK_CONFIG = OrderedDict([
    ('SEED', (int, None)),
    ('PATCH_SIZE', (int, 300)),
    ('STRIDE', (int, 150)),
    ('TAU', (float, 0.2)),
    ('EPOCHS', (int, 100)),
    ('LR', (float, 1e-4)),
    ('MOMENTUM', (float, 0.9)),
    ('BATCH_SIZE', (int, 64)),
    ('ALPHAS', (_floats, [0.01, 1.0, 0.75])),
    ('MODEL_SCALE', (_scale, 'paper')),
    ('AUGMENT', (_bool, True)),
    ('EVAL_EVERY', (int, 1)),
    ('SINGLE_PATCH_SEEDS', (int, 0)),
    ('N_HUMAN', (int, 6)),
    ('N_ROBOT', (int, 6)),
    ('N_HYBRID', (int, 3)),
    ('SIZE', (int, 900)),
    ('MIX', (float, 0.5)),
    ('N_TREES', (int, 100)),
    ('MAX_DEPTH', (int, 16)),
    ('MIN_LEAF', (int, 5)),
    ('BALANCED', (_bool, False)),
])


def option_name(key):
    return key.lower()


@dataclass
class RunConfig:
    command: str
    values: OrderedDict = field(default_factory=OrderedDict)
    inputs: OrderedDict = field(default_factory=OrderedDict)

    def __getitem__(self, key):
        return self.values[key]

    def to_dict(self):
        data = OrderedDict([('command', self.command), *self.values.items()])
        if self.inputs:
            data['INPUTS'] = OrderedDict(self.inputs)
        return data

    @property
    def digest(self):
        return config_digest(self.to_dict()).hex()

    @property
    def seed(self):
        return self.values.get('SEED')

    def model_config(self):
        return ModelConfig.for_scale(self['MODEL_SCALE'], self['PATCH_SIZE'])

    def train_config(self):
        augmentation = AugmentationConfig(seed=self['SEED']) if self['AUGMENT'] else None
        return TrainConfig(
            lr=self['LR'], momentum=self['MOMENTUM'], batch_size=self['BATCH_SIZE'], epochs=self['EPOCHS'],
            seed=self['SEED'], augmentation=augmentation, eval_every=self['EVAL_EVERY'], alphas=tuple(self['ALPHAS']),
        )

    def forest_config(self):
        return ForestConfig(
            n_trees=self['N_TREES'], max_depth=self['MAX_DEPTH'], min_leaf=self['MIN_LEAF'], seed=self['SEED'],
            n_jobs=getattr(settings, 'BRUSHMARK_FOREST_JOBS', 1),
        )


def _cast(key, cast, value):
    try:
        return cast(value)
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(f'Invalid value {value!r} for {key}: {exc}') from exc


def read_config_file(path):
    """KEY=value pairs of a config file (unknown keys are rejected)."""
    try:
        repository = RepositoryEnv(str(path))
    except OSError as exc:
        raise ConfigurationError(f'Cannot read config file {path}: {exc}') from exc
    unknown = sorted(set(repository.data) - set(FALLBACK_CONFIG))
    if unknown:
        raise ConfigurationError(f'Unknown keys in config file {path}: {", ".join(unknown)}')
    return OrderedDict((key, repository[key]) for key in FALLBACK_CONFIG if key in repository)


def resolve_run_config(command, keys, options=None, config_path=None, inputs=None):
    """
    Resolve the given keys for one command.

    Args:
        command: Subcommand name
        keys: FALLBACK_CONFIG keys the command uses, in report order
        options: Parsed flags; None values mean "not given"
        config_path: Optional KEY=value file
        inputs: Input file paths by flag name, echoed as given

    Returns:
        RunConfig
    """
    options = options or {}
    from_file = read_config_file(config_path) if config_path else {}
    values = OrderedDict()
    for key in keys:
        cast, default = FALLBACK_CONFIG[key]
        if key == 'SEED' and default is None:
            default = getattr(settings, 'BRUSHMARK_SEED', 0)
        value = options.get(option_name(key))
        if value is None:
            value = from_file.get(key, default)
        values[key] = _cast(key, cast, value)
    inputs = OrderedDict((name, str(path)) for name, path in (inputs or {}).items() if path)
    run_config = RunConfig(command, values, inputs)
    logger.debug('Resolved %s config: %s', command, dict(values))
    return run_config
