"""
Category-level entropy comparison: pure human, pure robot and hybrid paintings.

Statistical tests run on painting-level medians, so each painting counts once
regardless of how many patches it has.
"""

import logging
from collections import OrderedDict
from dataclasses import dataclass, field

from apps.core.exceptions import UsageError
from apps.core.seeding import rng_for
from apps.entropy.annotations import regions_by_painting, select_annotated_rows
from apps.entropy.conditional import DEFAULT_TAU, records_from_rows
from apps.entropy.stats import mann_whitney_u, summarize
from apps.evaluation.posteriors import group_by_painting
from apps.patches.labels import Author

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
CATEGORIES = (Author.HUMAN.value, Author.ROBOT.value, Author.HYBRID.value)


@dataclass
class CategoryComparison:
    stats: OrderedDict = field(default_factory=OrderedDict)
    tests: OrderedDict = field(default_factory=OrderedDict)


def balanced_pure_sample(paintings_by_author, n, seed=0):
    """
    Pick n painting ids per pure author, reproducibly.

    Authors with fewer than n paintings keep all of them. Chosen ids are
    returned in their original order.
    """
    if n < 1:
        raise UsageError(f'balanced sample size must be >= 1, got {n}')
    chosen = OrderedDict()
    for author, painting_ids in paintings_by_author.items():
        painting_ids = list(painting_ids)
        if len(painting_ids) <= n:
            if len(painting_ids) < n:
                logger.warning('Only %d %s paintings available for a balanced sample of %d', len(painting_ids), author, n)
            chosen[author] = painting_ids
            continue
        picked = set(rng_for('balanced-pure', seed, author).choice(len(painting_ids), size=n, replace=False).tolist())
        chosen[author] = [pid for index, pid in enumerate(painting_ids) if index in picked]
    return chosen


def _medians(stats):
    return list(stats.painting_medians.values()) if stats else []


def compare_categories(records_by_category):
    """
    EntropyStats per category plus Mann-Whitney tests on painting medians.

    Args:
        records_by_category: mapping 'human' / 'robot' / 'hybrid' -> EntropyRecords

    Returns:
        CategoryComparison with tests 'pure_vs_hybrid' and 'human_vs_robot'
        (a test is left out when either side has no included painting)
    """
    comparison = CategoryComparison()
    for category in CATEGORIES:
        records = records_by_category.get(category) or []
        if any(r.included for r in records):
            comparison.stats[category] = summarize(records)
        elif records:
            logger.warning('Every %s patch fell below the tau gate; category skipped', category)

    human = _medians(comparison.stats.get(Author.HUMAN.value))
    robot = _medians(comparison.stats.get(Author.ROBOT.value))
    hybrid = _medians(comparison.stats.get(Author.HYBRID.value))
    for name, a, b in (('pure_vs_hybrid', human + robot, hybrid), ('human_vs_robot', human, robot)):
        if a and b:
            comparison.tests[name] = mann_whitney_u(a, b)
        else:
            logger.warning('Skipping %s test: one side has no paintings', name)

    pure_records = (records_by_category.get(Author.HUMAN.value) or []) + (records_by_category.get(Author.ROBOT.value) or [])
    if any(r.included for r in pure_records):
        comparison.stats['pure'] = summarize(pure_records)
    return comparison


def analyze_posteriors(rows, tau=DEFAULT_TAU, regions=None, balance=False, seed=0):
    """
    Entropy records and category comparison for a posteriors file.

    Hybrid paintings with annotation regions are restricted to their annotated
    patches; hybrids without regions keep every patch. With balance, as many
    pure paintings per author as there are hybrids are sampled.

    Returns:
        (records, CategoryComparison)
    """
    grouped = group_by_painting(rows)
    regions = regions_by_painting(regions or [])
    authors = OrderedDict((pid, painting_rows[0]['author']) for pid, painting_rows in grouped.items())

    if balance:
        hybrids = [pid for pid, author in authors.items() if author == Author.HYBRID.value]
        if hybrids:
            pure = OrderedDict(
                (author, [pid for pid, a in authors.items() if a == author])
                for author in (Author.HUMAN.value, Author.ROBOT.value)
            )
            keep = {pid for ids in balanced_pure_sample(pure, len(hybrids), seed).values() for pid in ids}
            grouped = OrderedDict(
                (pid, painting_rows) for pid, painting_rows in grouped.items()
                if authors[pid] == Author.HYBRID.value or pid in keep
            )

    all_records = []
    by_category = OrderedDict((category, []) for category in CATEGORIES)
    for pid, painting_rows in grouped.items():
        author = authors[pid]
        if author == Author.HYBRID.value:
            if pid in regions:
                painting_rows = select_annotated_rows(painting_rows, regions[pid])
                logger.info('%s: %d annotated patches', pid, len(painting_rows))
            else:
                logger.warning('%s has no annotation regions; using every patch', pid)
        records = records_from_rows(painting_rows, tau)
        by_category[author].extend(records)
        all_records.extend(records)
    return all_records, compare_categories(by_category)


def comparison_to_dict(comparison, records, tau, run_config=None):
    return {
        'schema_version': SCHEMA_VERSION,
        'tau': tau,
        'run_config': run_config or {},
        'categories': OrderedDict((name, stats.to_dict()) for name, stats in comparison.stats.items()),
        'tests': OrderedDict((name, result.to_dict()) for name, result in comparison.tests.items()),
        'records': [
            {'painting_id': r.painting_id, 'x': r.x, 'y': r.y, 'entropy': r.entropy, 'included': r.included}
            for r in records
        ],
    }
