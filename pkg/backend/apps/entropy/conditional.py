"""
Conditional human/robot entropy of patch posteriors.

The blank probability is removed, the human and robot probabilities are
renormalized and the Shannon entropy of that two-way split is taken in bits.
Patches whose painted mass p_human + p_robot does not exceed tau are
excluded (their split is dominated by noise).
"""

from dataclasses import dataclass

import numpy as np
from scipy.stats import entropy as shannon_entropy

from apps.core.exceptions import UsageError
from apps.evaluation.serializers import POSTERIOR_TOLERANCE

DEFAULT_TAU = 0.2


@dataclass(frozen=True)
class ClassPosterior:
    p_blank: float
    p_human: float
    p_robot: float

    def __post_init__(self):
        values = (self.p_blank, self.p_human, self.p_robot)
        if not all(0.0 <= v <= 1.0 for v in values):
            raise UsageError(f'Posterior entries must lie in [0, 1], got {values}')
        if abs(sum(values) - 1.0) > POSTERIOR_TOLERANCE:
            raise UsageError(f'Posterior sums to {sum(values)}, expected 1')

    @classmethod
    def coerce(cls, value):
        if isinstance(value, cls):
            return value
        if isinstance(value, dict):
            return cls(value['p_blank'], value['p_human'], value['p_robot'])
        p_blank, p_human, p_robot = (float(v) for v in value)
        return cls(p_blank, p_human, p_robot)


@dataclass(frozen=True)
class EntropyRecord:
    painting_id: str
    x: int
    y: int
    entropy: float = None
    included: bool = False


def conditional_entropy(posterior, tau=DEFAULT_TAU):
    """
    Entropy in bits of the renormalized human/robot split, or None when excluded.

    Args:
        posterior: ClassPosterior, (p_blank, p_human, p_robot) or a posterior row
        tau: Painted-mass gate; p_human + p_robot must be strictly greater

    Raises:
        UsageError: the posterior is not a probability vector
    """
    p = ClassPosterior.coerce(posterior)
    painted = p.p_human + p.p_robot
    if painted <= tau:
        return None
    value = shannon_entropy([p.p_human, p.p_robot], base=2)
    return float(np.clip(value, 0.0, 1.0))


def entropy_records(painting_id, coords, posteriors, tau=DEFAULT_TAU):
    """EntropyRecords for one painting's patches (coords aligned with posteriors)."""
    coords = list(coords)
    posteriors = list(posteriors)
    if len(coords) != len(posteriors):
        raise UsageError(f'{len(coords)} patch coordinates but {len(posteriors)} posteriors')
    records = []
    for (x, y), posterior in zip(coords, posteriors):
        value = conditional_entropy(posterior, tau)
        records.append(EntropyRecord(painting_id, int(x), int(y), value, value is not None))
    return records


def records_from_rows(rows, tau=DEFAULT_TAU):
    """EntropyRecords from posterior-file rows, in row order."""
    return [
        EntropyRecord(row['painting_id'], row['x'], row['y'], value, value is not None)
        for row, value in ((row, conditional_entropy(row, tau)) for row in rows)
    ]
