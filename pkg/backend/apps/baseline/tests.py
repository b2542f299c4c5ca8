"""
Tests for the Baseline App

Run tests with: python manage.py test apps.baseline
"""

from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from apps.baseline.crossval import run_baseline_lopo
from apps.baseline.forest import DecisionTree, Forest, ForestConfig, predict_forest, train_forest
from apps.baseline.lbp import feature_matrix, lbp_codes, lbp_features
from apps.core.exceptions import ConfigurationError, UsageError
from apps.entropy.conditional import conditional_entropy
from apps.patches.extraction import PatchRecord
from apps.patches.labels import Author, PatchLabel
from apps.patches.manifest import ManifestEntry


def leaf(value):
    return DecisionTree(
        feature=np.array([-1]), threshold=np.array([0.0]), left=np.array([-1]), right=np.array([-1]),
        value=np.array([value]),
    )


class LbpTests(SimpleTestCase):
    """Tests for lbp_features."""

    def test_constant_patch(self):
        histogram = lbp_features(np.full((6, 5), 0.3))
        self.assertEqual(histogram.total, 12)
        self.assertEqual(histogram.frequencies[255], 1.0)

    def test_strict_maximum(self):
        pixels = np.zeros((3, 3))
        pixels[1, 1] = 1.0
        self.assertEqual(lbp_codes(pixels)[0, 0], 0)

    def test_single_bright_neighbor(self):
        """Only the right-hand neighbor (bit value 8) reaches the center."""
        self.assertEqual(lbp_codes(np.array([[0, 0, 0], [0, 5, 9], [0, 0, 0]]))[0, 0], 8)

    def test_neighbor_order(self):
        for (row, col), bit in zip(
            [(0, 0), (0, 1), (0, 2), (1, 2), (2, 2), (2, 1), (2, 0), (1, 0)], range(8),
        ):
            pixels = np.zeros((3, 3))
            pixels[1, 1] = 0.5
            pixels[row, col] = 1.0
            self.assertEqual(lbp_codes(pixels)[0, 0], 1 << bit)

    def test_counts_interior_pixels(self):
        pixels = np.random.default_rng(0).random((10, 7))
        self.assertEqual(lbp_features(pixels).total, 8 * 5)
        self.assertAlmostEqual(lbp_features(pixels).frequencies.sum(), 1.0)

    def test_shift_invariance(self):
        pixels = np.random.default_rng(1).integers(0, 200, (12, 12))
        np.testing.assert_array_equal(lbp_features(pixels).counts, lbp_features(pixels + 37).counts)

    def test_too_small(self):
        with self.assertRaises(UsageError):
            lbp_features(np.zeros((2, 5)))


class ForestTests(SimpleTestCase):
    """Tests for train_forest and predict_forest."""

    def separable(self):
        features = np.arange(20, dtype=np.float64)[:, None]
        labels = np.array([1] * 10 + [2] * 10)
        return features, labels

    def test_single_class(self):
        with self.assertLogs('apps.baseline.forest', level='WARNING'):
            model = train_forest(np.random.default_rng(2).random((8, 4)), [2] * 8, ForestConfig(n_trees=3))
        labels, _ = predict_forest(model, np.random.default_rng(3).random((5, 4)))
        self.assertEqual(labels.tolist(), [2] * 5)

    def test_threshold_separable(self):
        features, labels = self.separable()
        exact = train_forest(features, labels, ForestConfig(n_trees=1, min_leaf=1, bootstrap=False))
        self.assertEqual(exact.trees[0].threshold[0], 9.5)
        np.testing.assert_array_equal(predict_forest(exact, features)[0], labels)
        bagged = train_forest(features, labels, ForestConfig(n_trees=25, min_leaf=1, seed=4))
        self.assertEqual(float(np.mean(predict_forest(bagged, features)[0] == labels)), 1.0)

    def test_deterministic_across_jobs(self):
        rng = np.random.default_rng(5)
        features, labels = rng.random((60, 16)), rng.integers(0, 3, 60)
        serial = train_forest(features, labels, ForestConfig(n_trees=6, seed=7))
        parallel = train_forest(features, labels, ForestConfig(n_trees=6, seed=7, n_jobs=2))
        np.testing.assert_array_equal(predict_forest(serial, features)[1], predict_forest(parallel, features)[1])

    def test_single_tree(self):
        model = Forest([leaf(1)], n_features=2, config=ForestConfig(n_trees=1))
        labels, frequencies = predict_forest(model, np.zeros((2, 2)))
        self.assertEqual(labels.tolist(), [1, 1])
        np.testing.assert_array_equal(frequencies, [[0, 1, 0], [0, 1, 0]])

    def test_vote_fractions(self):
        model = Forest([leaf(1), leaf(1), leaf(2)], n_features=1, config=ForestConfig(n_trees=3))
        labels, frequencies = predict_forest(model, np.zeros((1, 1)))
        self.assertEqual(labels.tolist(), [PatchLabel.HUMAN])
        np.testing.assert_allclose(frequencies[0], [0, 2 / 3, 1 / 3])
        self.assertAlmostEqual(conditional_entropy(frequencies[0]), 0.9183, places=4)

    def test_tie_goes_to_lower_class(self):
        model = Forest([leaf(2), leaf(0)], n_features=1, config=ForestConfig(n_trees=2))
        self.assertEqual(predict_forest(model, np.zeros((1, 1)))[0].tolist(), [0])

    def test_dimension_mismatch(self):
        model = Forest([leaf(1)], n_features=3, config=ForestConfig(n_trees=1))
        with self.assertRaises(UsageError):
            predict_forest(model, np.zeros((2, 4)))

    def test_config_validation(self):
        with self.assertRaises(ConfigurationError):
            ForestConfig(n_trees=0)
        self.assertEqual(ForestConfig().split_features(256), 16)


def striped_patches(painting_id, label, count, seed, size=16):
    """Blank patches are flat; human patches carry vertical stripes, robot patches horizontal."""
    rng = np.random.default_rng(seed)
    patches = []
    for index in range(count):
        if label is PatchLabel.BLANK:
            pixels = np.ones((size, size))
        else:
            stripes = np.tile((np.arange(size) % 2) * 0.5, (size, 1))
            pixels = stripes if label is PatchLabel.HUMAN else stripes.T
            pixels = pixels + rng.normal(0, 0.01, (size, size))
        patches.append(PatchRecord(painting_id, index * size, 0, size, label, np.clip(pixels, 0, 1)))
    return patches


class BaselineLopoTests(SimpleTestCase):
    """Tests for run_baseline_lopo."""

    def test_texture_classes_recovered(self):
        entries, patches = [], {}
        for index, author in enumerate([Author.HUMAN, Author.ROBOT, Author.HUMAN, Author.ROBOT]):
            painting_id = f'{author.value}_painting_{index}'
            entries.append(ManifestEntry(Path(f'{painting_id}.png'), painting_id, author))
            label = PatchLabel.for_author(author)
            patches[index] = striped_patches(painting_id, label, 6, index) + striped_patches(painting_id, PatchLabel.BLANK, 2, index)
        report = run_baseline_lopo(entries, ForestConfig(n_trees=10, min_leaf=1), patches_by_entry=patches)
        self.assertEqual(report.model_family, 'lbp_rf')
        self.assertEqual(len(report.folds), 4)
        self.assertGreaterEqual(report.mean_accuracy, 0.95)
        self.assertIsNone(report.final_mean_accuracy)
        self.assertEqual(feature_matrix(patches[0]).shape, (8, 256))
