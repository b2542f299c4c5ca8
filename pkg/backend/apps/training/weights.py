"""
Class weights for the imbalance-aware loss.

    w_c = alpha_c * N_total / N_c

computed over the training split of a fold only.
"""

import logging
from dataclasses import dataclass

import numpy as np

from apps.core.exceptions import ConfigurationError
from apps.patches.labels import CLASS_NAMES, NUM_CLASSES

logger = logging.getLogger(__name__)

DEFAULT_ALPHAS = (0.01, 1.0, 0.75)


@dataclass(frozen=True)
class ClassWeights:
    w_blank: float
    w_human: float
    w_robot: float
    alphas: tuple
    counts: tuple

    def as_array(self):
        return np.array([self.w_blank, self.w_human, self.w_robot])

    def loss_weights(self):
        """
        Weights handed to the loss. Classes absent from the split (weight 0)
        never appear as targets, so any positive placeholder leaves the loss
        unchanged; 1.0 is used.
        """
        weights = self.as_array()
        return np.where(weights > 0, weights, 1.0)

    def to_dict(self):
        return {
            'w_blank': self.w_blank, 'w_human': self.w_human, 'w_robot': self.w_robot,
            'alphas': list(self.alphas), 'counts': list(self.counts),
        }


def compute_class_weights(counts, alphas=DEFAULT_ALPHAS, present_only=False):
    """
    Args:
        counts: Patch counts per class (Blank, Human, Robot)
        alphas: Per-class scaling factors, all strictly positive
        present_only: Give absent classes weight 0 (with a warning) instead of failing

    Raises:
        ConfigurationError: non-positive alpha, or a zero count without present_only
    """
    counts = np.asarray(counts, dtype=np.int64)
    alphas = np.asarray(alphas, dtype=np.float64)
    if counts.shape != (NUM_CLASSES,) or alphas.shape != (NUM_CLASSES,):
        raise ConfigurationError(f'Expected {NUM_CLASSES} counts and alphas')
    if np.any(alphas <= 0):
        raise ConfigurationError(f'All alphas must be strictly positive, got {alphas.tolist()}')
    if np.any(counts < 0):
        raise ConfigurationError(f'Counts must be non-negative, got {counts.tolist()}')

    absent = counts == 0
    if np.any(absent):
        names = [CLASS_NAMES[i] for i in np.flatnonzero(absent)]
        if not present_only:
            raise ConfigurationError(f'No training patches for class(es) {", ".join(names)}')
        if np.all(absent):
            raise ConfigurationError('Training split has no labeled patches')
        logger.warning('Classes absent from training split: %s (weight 0)', ', '.join(names))

    total = counts.sum()
    weights = np.zeros(NUM_CLASSES)
    present = ~absent
    weights[present] = alphas[present] * total / counts[present]
    return ClassWeights(
        w_blank=float(weights[0]), w_human=float(weights[1]), w_robot=float(weights[2]),
        alphas=tuple(float(a) for a in alphas), counts=tuple(int(c) for c in counts),
    )
