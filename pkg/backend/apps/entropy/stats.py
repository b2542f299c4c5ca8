"""Distribution summaries of conditional entropy and the Mann-Whitney U test."""

import math
from collections import OrderedDict
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
from scipy.stats import norm, rankdata

from apps.core.exceptions import UsageError

TAIL_THRESHOLDS = (0.5, 0.7, 0.9)
EXACT_LIMIT = 12
RANK_TOLERANCE = 1e-9


@dataclass
class EntropyStats:
    n_patches: int
    median: float
    mean: float
    std: float
    iqr: tuple
    tail_fractions: dict
    painting_medians: dict = field(default_factory=OrderedDict)
    median_mean: float = None
    median_std: float = None

    def to_dict(self):
        return {
            'n_patches': self.n_patches,
            'median': self.median,
            'mean': self.mean,
            'std': self.std,
            'iqr': list(self.iqr),
            'tail_fractions': {f'{t:g}': v for t, v in self.tail_fractions.items()},
            'painting_medians': dict(self.painting_medians),
            'median_mean': self.median_mean,
            'median_std': self.median_std,
        }


def summarize(records):
    """
    Pooled and per-painting statistics of the included entropy records.

    Percentiles interpolate linearly between order statistics. The pooled
    std uses ddof=0, the spread of the per-painting medians ddof=1.

    Raises:
        UsageError: no record passed the tau gate
    """
    included = [r for r in records if r.included]
    if not included:
        raise UsageError('No entropy records left after the tau gate')
    values = np.array([r.entropy for r in included], dtype=np.float64)

    by_painting = OrderedDict()
    for record in included:
        by_painting.setdefault(record.painting_id, []).append(record.entropy)
    medians = OrderedDict((pid, float(np.median(v))) for pid, v in by_painting.items())
    median_values = np.array(list(medians.values()))

    q25, q75 = np.percentile(values, [25, 75], method='linear')
    return EntropyStats(
        n_patches=len(values),
        median=float(np.median(values)),
        mean=float(values.mean()),
        std=float(values.std(ddof=0)),
        iqr=(float(q25), float(q75)),
        tail_fractions={t: float(np.mean(values > t)) for t in TAIL_THRESHOLDS},
        painting_medians=medians,
        median_mean=float(median_values.mean()),
        median_std=float(median_values.std(ddof=1)) if len(median_values) > 1 else 0.0,
    )


def empirical_cdf(values, grid):
    """Fraction of values <= each grid point."""
    values = np.sort(np.asarray(values, dtype=np.float64))
    if values.size == 0:
        raise UsageError('empirical_cdf needs at least one value')
    return np.searchsorted(values, np.asarray(grid, dtype=np.float64), side='right') / values.size


@dataclass(frozen=True)
class MannWhitneyResult:
    u: float
    u_a: float
    u_b: float
    n_a: int
    n_b: int
    p_exact: float
    p_normal: float

    @property
    def p_value(self):
        return self.p_exact if self.p_exact is not None else self.p_normal

    def to_dict(self):
        return {
            'u': self.u, 'u_a': self.u_a, 'u_b': self.u_b, 'n_a': self.n_a, 'n_b': self.n_b,
            'p_exact': self.p_exact, 'p_normal': self.p_normal, 'p_value': self.p_value,
        }


def _clamp_p(p):
    return float(min(1.0, max(p, np.finfo(np.float64).tiny)))


def _exact_p(ranks, n_a, u_a):
    """Two-sided p by enumerating every assignment of n_a ranks to the first sample."""
    n = len(ranks)
    center = n_a * (n - n_a) / 2.0
    observed = abs(u_a - center)
    offset = n_a * (n_a + 1) / 2.0
    extreme = total = 0
    for chosen in combinations(range(n), n_a):
        total += 1
        u = ranks[list(chosen)].sum() - offset
        if abs(u - center) >= observed - RANK_TOLERANCE:
            extreme += 1
    return extreme / total


def _normal_p(ranks, n_a, n_b, u_a):
    """Normal approximation with tie and continuity corrections."""
    n = n_a + n_b
    _, tie_counts = np.unique(ranks, return_counts=True)
    tie_term = float(((tie_counts ** 3) - tie_counts).sum()) / (n * (n - 1)) if n > 1 else 0.0
    variance = n_a * n_b / 12.0 * ((n + 1) - tie_term)
    if variance <= 0:
        return 1.0
    z = max(abs(u_a - n_a * n_b / 2.0) - 0.5, 0.0) / math.sqrt(variance)
    return 2.0 * norm.sf(z)


def mann_whitney_u(a, b, exact_limit=EXACT_LIMIT):
    """
    Two-sided Mann-Whitney U test with midranks for ties.

    U is min(U_a, U_b). The exact p enumerates every label assignment when
    n_a + n_b <= exact_limit and is None above it; the normal approximation
    is always reported. Both are clamped to (0, 1].

    Raises:
        UsageError: either sample is empty
    """
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.size == 0 or b.size == 0:
        raise UsageError('mann_whitney_u needs two non-empty samples')
    n_a, n_b = a.size, b.size
    ranks = rankdata(np.concatenate([a, b]), method='average')
    u_a = float(ranks[:n_a].sum() - n_a * (n_a + 1) / 2.0)
    u_b = float(n_a * n_b - u_a)

    p_exact = None
    if n_a + n_b <= exact_limit:
        p_exact = _clamp_p(_exact_p(ranks, n_a, u_a))
    return MannWhitneyResult(
        u=min(u_a, u_b), u_a=u_a, u_b=u_b, n_a=n_a, n_b=n_b,
        p_exact=p_exact, p_normal=_clamp_p(_normal_p(ranks, n_a, n_b, u_a)),
    )
