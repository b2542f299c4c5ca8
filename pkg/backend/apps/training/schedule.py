import numpy as np

from apps.core.exceptions import ConfigurationError


def epoch_schedule(n_patches, batch_size, seed, epoch):
    """
    Seeded shuffle of range(n_patches) cut into batches; the last batch may be short.

    The permutation depends only on (seed, epoch).
    """
    if n_patches < 1:
        raise ConfigurationError('epoch_schedule needs at least one patch')
    if batch_size < 1:
        raise ConfigurationError(f'batch_size must be >= 1, got {batch_size}')
    order = np.random.default_rng([int(seed), int(epoch)]).permutation(n_patches)
    return [order[start:start + batch_size] for start in range(0, n_patches, batch_size)]


def merge_singleton_tail(batches):
    """Fold a trailing batch of one sample into the previous batch (batch norm needs N >= 2)."""
    if len(batches) >= 2 and len(batches[-1]) == 1:
        return [*batches[:-2], np.concatenate([batches[-2], batches[-1]])]
    return batches
