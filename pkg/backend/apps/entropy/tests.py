"""
Tests for the Entropy App

Run tests with: python manage.py test apps.entropy
"""

import tempfile
from itertools import combinations
from pathlib import Path

import numpy as np
from django.core.exceptions import ValidationError
from django.test import SimpleTestCase

from apps.core.exceptions import FormatError, UsageError
from apps.entropy.analysis import analyze_posteriors, balanced_pure_sample, compare_categories
from apps.entropy.annotations import (
    AnnotationRegion, read_annotations, select_annotated_patches, select_annotated_rows, write_annotations,
)
from apps.entropy.conditional import EntropyRecord, conditional_entropy, entropy_records
from apps.entropy.stats import empirical_cdf, mann_whitney_u, summarize
from apps.patches.images import GrayImage


def records(painting_id, values):
    return [EntropyRecord(painting_id, i, 0, v, True) for i, v in enumerate(values)]


def posterior_row(painting_id, author, x, y, p_human, p_robot, size=300):
    return {
        'painting_id': painting_id, 'author': author, 'x': x, 'y': y, 'size': size, 'label': None,
        'p_blank': 1.0 - p_human - p_robot, 'p_human': p_human, 'p_robot': p_robot,
    }


class ConditionalEntropyTests(SimpleTestCase):
    """Tests for conditional_entropy."""

    def test_symmetric_maximum(self):
        self.assertAlmostEqual(conditional_entropy((0.1, 0.45, 0.45)), 1.0, places=12)

    def test_one_sided(self):
        self.assertEqual(conditional_entropy((0.2, 0.8, 0.0)), 0.0)

    def test_tau_gate(self):
        self.assertIsNone(conditional_entropy((0.9, 0.05, 0.05)))

    def test_gate_is_strict(self):
        self.assertIsNone(conditional_entropy((0.8, 0.1, 0.1)))
        self.assertIsNotNone(conditional_entropy((0.79, 0.105, 0.105)))

    def test_three_to_one(self):
        self.assertAlmostEqual(conditional_entropy((0.0, 0.75, 0.25)), 0.8113, places=4)

    def test_vote_fractions(self):
        self.assertAlmostEqual(conditional_entropy((0.0, 2 / 3, 1 / 3)), 0.9183, places=4)

    def test_not_normalized(self):
        with self.assertRaises(UsageError):
            conditional_entropy((0.5, 0.5, 0.5))

    def test_bounds_and_symmetry(self):
        """H in [0, 1] and symmetric in human/robot for 10,000 random posteriors."""
        rng = np.random.default_rng(0)
        for p in rng.dirichlet([0.5, 0.5, 0.5], 10000):
            value = conditional_entropy(p)
            if value is None:
                continue
            self.assertGreaterEqual(value, 0.0)
            self.assertLessEqual(value, 1.0)
            self.assertAlmostEqual(value, conditional_entropy((p[0], p[2], p[1])), places=12)

    def test_tau_monotonicity(self):
        rng = np.random.default_rng(1)
        posteriors = rng.dirichlet([1, 1, 1], 500)
        coords = [(i, 0) for i in range(500)]
        counts = [
            sum(r.included for r in entropy_records('p', coords, posteriors, tau))
            for tau in (0.0, 0.1, 0.2, 0.5, 0.9)
        ]
        self.assertEqual(counts, sorted(counts, reverse=True))


class SummarizeTests(SimpleTestCase):
    """Tests for summarize and empirical_cdf."""

    def test_constant(self):
        stats = summarize(records('a', [0.5] * 7))
        self.assertEqual((stats.median, stats.mean, stats.std), (0.5, 0.5, 0.0))
        self.assertEqual(stats.iqr, (0.5, 0.5))

    def test_two_points(self):
        stats = summarize(records('a', [0.0, 1.0]))
        self.assertEqual(stats.median, 0.5)
        self.assertEqual(stats.tail_fractions[0.5], 0.5)
        self.assertEqual(stats.tail_fractions[0.9], 0.5)
        self.assertEqual(stats.iqr, (0.25, 0.75))

    def test_tails_non_increasing(self):
        values = np.random.default_rng(2).random(200)
        tails = list(summarize(records('a', values)).tail_fractions.values())
        self.assertEqual(tails, sorted(tails, reverse=True))

    def test_per_painting_medians(self):
        stats = summarize(records('a', [0.1, 0.2, 0.3]) + records('b', [0.5, 1.0]))
        self.assertEqual(list(stats.painting_medians), ['a', 'b'])
        np.testing.assert_allclose(list(stats.painting_medians.values()), [0.2, 0.75])
        self.assertAlmostEqual(stats.median_mean, 0.475)
        self.assertAlmostEqual(stats.median_std, np.std([0.2, 0.75], ddof=1))

    def test_excluded_records_ignored(self):
        excluded = [EntropyRecord('a', 0, 0, None, False)]
        with self.assertRaises(UsageError):
            summarize(excluded)
        self.assertEqual(summarize(excluded + records('a', [0.4])).n_patches, 1)

    def test_empirical_cdf(self):
        np.testing.assert_allclose(empirical_cdf([0.1, 0.5, 0.5, 0.9], [0.0, 0.5, 1.0]), [0.0, 0.75, 1.0])


def permutation_p(a, b):
    """Two-sided p from counting pairwise wins over every relabeling."""
    pooled = list(a) + list(b)
    n_a, n = len(a), len(a) + len(b)
    center = len(a) * len(b) / 2

    def wins(first, second):
        return sum((x > y) + 0.5 * (x == y) for x in first for y in second)

    observed = abs(wins(a, b) - center)
    hits = total = 0
    for chosen in combinations(range(n), n_a):
        first = [pooled[i] for i in chosen]
        second = [pooled[i] for i in range(n) if i not in chosen]
        total += 1
        hits += abs(wins(first, second) - center) >= observed - 1e-9
    return hits / total


class MannWhitneyTests(SimpleTestCase):
    """Tests for mann_whitney_u."""

    def test_separated_triples(self):
        result = mann_whitney_u([1, 2, 3], [4, 5, 6])
        self.assertEqual(result.u, 0)
        self.assertAlmostEqual(result.p_exact, 0.1)
        self.assertEqual(result.p_value, result.p_exact)

    def test_full_ties(self):
        result = mann_whitney_u([1, 2], [1, 2])
        self.assertEqual(result.u, 2)
        self.assertEqual(result.p_exact, 1.0)

    def test_symmetry(self):
        a, b = [0.3, 0.1, 0.7, 0.2], [0.5, 0.9, 0.8]
        forward, backward = mann_whitney_u(a, b), mann_whitney_u(b, a)
        self.assertEqual(forward.u, backward.u)
        self.assertAlmostEqual(forward.p_exact, backward.p_exact)
        self.assertAlmostEqual(forward.p_normal, backward.p_normal)

    def test_matches_permutation_oracle(self):
        """Exact p equals a pairwise-count enumeration for tie-free inputs up to 8 values."""
        rng = np.random.default_rng(3)
        for _ in range(40):
            n_a = int(rng.integers(1, 5))
            n_b = int(rng.integers(1, 9 - n_a))
            values = rng.permutation(20)[:n_a + n_b] / 20
            a, b = values[:n_a], values[n_a:]
            self.assertAlmostEqual(mann_whitney_u(a, b).p_exact, permutation_p(a, b), places=12)

    def test_ten_versus_five_separated(self):
        result = mann_whitney_u(np.linspace(0.1, 0.2, 10), np.linspace(0.5, 0.6, 5))
        self.assertEqual(result.u, 0)
        self.assertIsNone(result.p_exact)
        self.assertLess(result.p_value, 0.01)
        exact = mann_whitney_u(np.linspace(0.1, 0.2, 10), np.linspace(0.5, 0.6, 5), exact_limit=15)
        self.assertAlmostEqual(exact.p_exact, 2 / 3003)

    def test_empty(self):
        with self.assertRaises(UsageError):
            mann_whitney_u([], [1.0])


class AnnotationTests(SimpleTestCase):
    """Tests for annotation regions and annotated patch selection."""

    def setUp(self):
        self.image = GrayImage(np.ones((300, 300)), 'hybrid_painting_1')

    def region(self, x0, y0, x1, y1):
        return AnnotationRegion('hybrid_painting_1', x0, y0, x1, y1)

    def test_exact_patch(self):
        self.assertEqual(select_annotated_patches(self.image, [self.region(0, 0, 300, 300)]), [(0, 0)])

    def test_below_half(self):
        self.assertEqual(select_annotated_patches(self.image, [self.region(0, 0, 300, 147)]), [])

    def test_union_not_sum(self):
        regions = [self.region(0, 0, 300, 120), self.region(0, 60, 300, 180)]
        self.assertEqual(select_annotated_patches(self.image, regions), [(0, 0)])
        overlapping = [self.region(0, 0, 300, 100), self.region(0, 0, 300, 100)]
        self.assertEqual(select_annotated_patches(self.image, overlapping), [])

    def test_grid_selection(self):
        image = GrayImage(np.ones((600, 600)), 'hybrid_painting_1')
        selected = select_annotated_patches(image, [self.region(160, 160, 440, 440)])
        self.assertEqual(selected, [(150, 150)])

    def test_out_of_bounds(self):
        with self.assertRaisesMessage(ValidationError, 'hybrid_painting_1 (0, 0, 301, 10)'):
            select_annotated_patches(self.image, [self.region(0, 0, 301, 10)])

    def test_empty_region(self):
        with self.assertRaises(ValidationError):
            self.region(10, 0, 10, 5)

    def test_file_round_trip_and_validation(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'annotations.jsonl'
            regions = [self.region(0, 0, 30, 40), self.region(5, 5, 50, 60)]
            write_annotations(path, regions)
            self.assertEqual(read_annotations(path), regions)
            path.write_text('{"painting_id": "x", "x0": 5, "y0": 0, "x1": 5, "y1": 9}\n')
            with self.assertRaisesMessage(FormatError, ':1:'):
                read_annotations(path)

    def test_rows_filtered(self):
        rows = [posterior_row('hybrid_painting_1', 'hybrid', x, 0, 0.4, 0.4) for x in (0, 150, 300)]
        kept = select_annotated_rows(rows, [self.region(330, 0, 600, 300)])
        self.assertEqual([row['x'] for row in kept], [300])


class CategoryComparisonTests(SimpleTestCase):
    """Tests for compare_categories, balanced_pure_sample and analyze_posteriors."""

    def test_hybrids_elevated(self):
        by_category = {
            'human': records('h1', [0.05, 0.1]) + records('h2', [0.02, 0.08]),
            'robot': records('r1', [0.1, 0.0]) + records('r2', [0.12, 0.03]),
            'hybrid': records('x1', [0.8, 0.9]) + records('x2', [0.7, 0.95]),
        }
        comparison = compare_categories(by_category)
        self.assertEqual(comparison.tests['pure_vs_hybrid'].u, 0)
        self.assertGreater(comparison.stats['hybrid'].median, comparison.stats['pure'].median)
        self.assertIn('human_vs_robot', comparison.tests)

    def test_missing_category_skips_test(self):
        with self.assertLogs('apps.entropy.analysis', level='WARNING'):
            comparison = compare_categories({'human': records('h1', [0.1]), 'robot': records('r1', [0.2])})
        self.assertNotIn('pure_vs_hybrid', comparison.tests)

    def test_balanced_sample(self):
        pool = {'human': [f'h{i}' for i in range(6)], 'robot': [f'r{i}' for i in range(6)]}
        first = balanced_pure_sample(pool, 3, seed=4)
        self.assertEqual(first, balanced_pure_sample(pool, 3, seed=4))
        self.assertEqual([len(v) for v in first.values()], [3, 3])
        self.assertEqual(first['human'], sorted(first['human'], key=pool['human'].index))

    def test_analyze_posteriors(self):
        rows = [
            posterior_row('human_painting_0', 'human', 0, 0, 0.9, 0.05),
            posterior_row('robot_painting_0', 'robot', 0, 0, 0.05, 0.9),
            posterior_row('robot_painting_0', 'robot', 150, 0, 0.02, 0.03),
            posterior_row('hybrid_painting_0', 'hybrid', 0, 0, 0.45, 0.45),
            posterior_row('hybrid_painting_0', 'hybrid', 300, 0, 0.9, 0.05),
        ]
        regions = [AnnotationRegion('hybrid_painting_0', 0, 0, 300, 300)]
        all_records, comparison = analyze_posteriors(rows, 0.2, regions)
        self.assertEqual(len(all_records), 4)
        self.assertEqual(sum(r.included for r in all_records), 3)
        self.assertAlmostEqual(comparison.stats['hybrid'].median, 1.0)
