"""
Tests for the Evaluation App

Run tests with: python manage.py test apps.evaluation
"""

from pathlib import Path
from unittest.mock import patch

import numpy as np
from django.test import SimpleTestCase, override_settings

from apps.core.exceptions import LeakageError, UsageError
from apps.evaluation.crossval import (
    build_folds, fold_result_from_dict, fold_result_to_dict, report_to_dict, run_fold, run_lopo,
    single_patch_regime,
)
from apps.evaluation.metrics import aggregate_fold_accuracies, compute_metrics, normalize_rows
from apps.evaluation.voting import Verdict, majority_vote, painting_accuracy
from apps.network.config import ModelConfig
from apps.patches.labels import Author, PatchLabel
from apps.patches.manifest import ManifestEntry
from apps.training.config import TrainConfig
from apps.training.tests import separable_patches

B, H, R = PatchLabel.BLANK, PatchLabel.HUMAN, PatchLabel.ROBOT


def corpus(n_human, n_robot, n_hybrid=0):
    """In-memory manifest entries plus their patches (class encoded in intensity)."""
    entries, patches = [], {}
    specs = [('human', Author.HUMAN, H)] * n_human + [('robot', Author.ROBOT, R)] * n_robot
    for index, (stem, author, label) in enumerate(specs):
        painting_id = f'{stem}_painting_{index}'
        entries.append(ManifestEntry(Path(f'{painting_id}.png'), painting_id, author))
        patches[index] = separable_patches(painting_id, {label: 6, B: 2}, seed=index)
    for k in range(n_hybrid):
        entries.append(ManifestEntry(Path(f'hybrid_{k}.png'), f'hybrid_painting_{k}', Author.HYBRID))
    return entries, patches


def quick_config(**overrides):
    values = dict(lr=0.01, batch_size=8, epochs=6, seed=2, augmentation=None)
    values.update(overrides)
    return TrainConfig(**values)


class ComputeMetricsTests(SimpleTestCase):
    """Tests for compute_metrics."""

    def test_perfect_predictions(self):
        labels = [0, 1, 2, 1, 0]
        metrics = compute_metrics(labels, labels)
        self.assertEqual(metrics.accuracy, 1.0)
        np.testing.assert_array_equal(metrics.normalized_confusion, np.eye(3))

    def test_hand_counted_example(self):
        metrics = compute_metrics([H, R, R], [H, H, R])
        self.assertAlmostEqual(metrics.accuracy, 2 / 3)
        self.assertEqual(metrics.per_class_recall[H], 0.5)
        self.assertEqual(metrics.per_class_recall[R], 1.0)
        self.assertEqual(metrics.per_class_precision[R], 0.5)
        self.assertIsNone(metrics.per_class_recall[B])
        self.assertIsNone(metrics.per_class_precision[B])
        self.assertAlmostEqual(metrics.balanced_accuracy, 0.75)

    def test_brute_force_oracle(self):
        """Matches a plain tally on 100 random instances."""
        rng = np.random.default_rng(0)
        for _ in range(100):
            n = int(rng.integers(1, 200))
            labels = rng.integers(0, 3, n).tolist()
            preds = rng.integers(0, 3, n).tolist()
            metrics = compute_metrics(preds, labels)
            tally = [[0] * 3 for _ in range(3)]
            for truth, guess in zip(labels, preds):
                tally[truth][guess] += 1
            self.assertEqual(metrics.confusion.tolist(), tally)
            self.assertEqual(metrics.accuracy, sum(t == p for t, p in zip(labels, preds)) / n)
            for c in range(3):
                support = sum(1 for t in labels if t == c)
                predicted = sum(1 for p in preds if p == c)
                hits = tally[c][c]
                self.assertEqual(metrics.per_class_recall[c], hits / support if support else None)
                self.assertEqual(metrics.per_class_precision[c], hits / predicted if predicted else None)

    def test_length_mismatch(self):
        with self.assertRaises(UsageError):
            compute_metrics([0, 1], [0])

    def test_zero_support_rows(self):
        normalized = normalize_rows([[0, 0, 0], [1, 3, 0], [0, 0, 5]])
        np.testing.assert_array_equal(normalized[0], [0, 0, 0])
        np.testing.assert_allclose(normalized[1:].sum(axis=1), 1.0, atol=1e-9)

    def test_published_fold_table(self):
        """Mean of the fifteen published per-fold accuracies is 88.79."""
        values = [99.40, 90.26, 74.20, 69.00, 85.43, 96.97, 97.88, 75.69,
                  81.12, 95.16, 97.69, 97.22, 86.42, 88.90, 96.52]
        mean, std = aggregate_fold_accuracies(values)
        self.assertAlmostEqual(mean, 88.79, places=2)
        self.assertAlmostEqual(std, 9.88, delta=0.01)
        self.assertEqual(aggregate_fold_accuracies([0.5]), (0.5, 0.0))


class MajorityVoteTests(SimpleTestCase):
    """Tests for majority_vote."""

    def test_mode_after_blank_removal(self):
        self.assertIs(majority_vote([H, H, R, B]), Verdict.HUMAN)

    def test_all_blank(self):
        self.assertIs(majority_vote([B, B, B]), Verdict.INDETERMINATE)

    def test_tie_without_posteriors(self):
        self.assertIs(majority_vote([H, R, B]), Verdict.INDETERMINATE)

    def test_tie_broken_by_posterior_mass(self):
        posteriors = [[0.1, 0.5, 0.4], [0.1, 0.3, 0.6], [0.9, 0.05, 0.05]]
        self.assertIs(majority_vote([H, R, B], posteriors), Verdict.ROBOT)

    def test_permutation_invariance(self):
        rng = np.random.default_rng(1)
        preds = rng.integers(0, 3, 25)
        posteriors = rng.dirichlet([1, 1, 1], 25)
        expected = majority_vote(preds, posteriors)
        for _ in range(10):
            order = rng.permutation(25)
            self.assertIs(majority_vote(preds[order], posteriors[order]), expected)

    def test_empty(self):
        with self.assertRaises(UsageError):
            majority_vote([])

    def test_thirteen_of_fifteen(self):
        verdicts = [Verdict.HUMAN] * 7 + [Verdict.ROBOT] * 6 + [Verdict.HUMAN, Verdict.INDETERMINATE]
        authors = ['human'] * 7 + ['robot'] * 8
        correct, total, accuracy = painting_accuracy(verdicts, authors)
        self.assertEqual((correct, total), (13, 15))
        self.assertAlmostEqual(accuracy * 100, 86.7, places=1)


class FoldConstructionTests(SimpleTestCase):
    """Tests for fold construction and preconditions."""

    def test_one_fold_per_pure_painting(self):
        entries, _ = corpus(7, 8, 5)
        folds = build_folds(entries)
        self.assertEqual(len(folds), 15)
        for spec in folds:
            self.assertNotIn(spec.heldout_index, spec.train_indices)
            self.assertFalse(any(entries[i].author is Author.HYBRID for i in spec.train_indices))

    def test_duplicate_painting_id_is_leakage(self):
        entries, _ = corpus(2, 2)
        entries[1] = ManifestEntry(entries[1].path, entries[0].painting_id, Author.HUMAN)
        with self.assertRaises(LeakageError):
            build_folds(entries)

    def test_hybrids_only(self):
        entries, _ = corpus(0, 0, 3)
        with self.assertRaises(UsageError):
            run_lopo(entries, ModelConfig.tiny(), quick_config(), patches_by_entry={})

    def test_single_author(self):
        entries, patches = corpus(3, 0)
        with self.assertRaises(UsageError):
            run_lopo(entries, ModelConfig.tiny(), quick_config(), patches_by_entry=patches)


class RunLopoTests(SimpleTestCase):
    """Tests for run_lopo and report aggregation."""

    def test_two_paintings_two_folds(self):
        entries, patches = corpus(1, 1)
        report = run_lopo(entries, ModelConfig.tiny(), quick_config(), 32, 32, patches_by_entry=patches)
        self.assertEqual([fold.held_out_painting for fold in report.folds], ['human_painting_0', 'robot_painting_1'])
        self.assertEqual(report.vote_total, 2)

    def test_fold_isolation_and_consistency(self):
        """Per-fold results equal isolated re-runs; pooled confusion is the fold sum."""
        entries, patches = corpus(2, 2, 1)
        model_cfg, train_cfg = ModelConfig.tiny(), quick_config()
        report = run_lopo(entries, model_cfg, train_cfg, patches_by_entry=patches)
        for spec, fold in zip(build_folds(entries), report.folds):
            isolated = run_fold(entries, patches, spec, model_cfg, train_cfg)
            self.assertEqual(isolated.patch_accuracy, fold.patch_accuracy)
        np.testing.assert_array_equal(report.confusion, sum(fold.confusion for fold in report.folds))
        for row, total in zip(report.normalized_confusion, report.confusion.sum(axis=1)):
            if total:
                self.assertAlmostEqual(row.sum(), 1.0, delta=1e-9)
        data = report_to_dict(report, {'seed': 2})
        self.assertEqual(data['schema_version'], 1)
        self.assertEqual(len(data['folds']), 4)

    @override_settings(BRUSHMARK_PARALLEL_FOLDS=True, CELERY_TASK_ALWAYS_EAGER=False)
    def test_parallel_dispatch(self):
        entries, _ = corpus(1, 1)
        fake = fold_result_to_dict(run_fold(*self._single_fold()))
        results = [fold_result_from_dict({**fake, 'fold_index': 1}), fold_result_from_dict(fake)]
        with patch('apps.evaluation.crossval._dispatch_folds', return_value=sorted(results, key=lambda r: r.fold_index)) as dispatch:
            report = run_lopo(entries, ModelConfig.tiny(), quick_config(), manifest_path='manifest.jsonl')
        dispatch.assert_called_once()
        self.assertEqual([fold.fold_index for fold in report.folds], [0, 1])

    def _single_fold(self):
        entries, patches = corpus(1, 1)
        return entries, patches, build_folds(entries)[0], ModelConfig.tiny(), quick_config(epochs=1)

    def test_fold_result_transport(self):
        result = run_fold(*self._single_fold())
        restored = fold_result_from_dict(fold_result_to_dict(result))
        self.assertEqual(restored.painting_vote, result.painting_vote)
        np.testing.assert_array_equal(restored.confusion, result.confusion)
        np.testing.assert_allclose(restored.posteriors, result.posteriors)


class SinglePatchRegimeTests(SimpleTestCase):
    """Tests for single_patch_regime."""

    def test_deterministic(self):
        entries, patches = corpus(2, 2)
        first = single_patch_regime(entries, ModelConfig.tiny(), quick_config(), 1, patches_by_entry=patches)
        second = single_patch_regime(entries, ModelConfig.tiny(), quick_config(), 1, patches_by_entry=patches)
        self.assertEqual(first.accuracies, second.accuracies)
        self.assertEqual(first.std_accuracy, 0.0)

    def test_two_paintings_rejected_before_training(self):
        """Two pure paintings leave one patch per training split, which batch norm cannot train on."""
        entries, patches = corpus(1, 1)
        self.assertEqual(len(build_folds(entries)), 2)
        with patch('apps.evaluation.crossval.train_fold') as train:
            with self.assertRaisesRegex(UsageError, 'at least three pure paintings'):
                single_patch_regime(entries, ModelConfig.tiny(), quick_config(), 1, patches_by_entry=patches)
        train.assert_not_called()

    def test_blank_painting_skipped(self):
        entries, patches = corpus(2, 2)
        extra = ManifestEntry(Path('empty.png'), 'empty_painting', Author.ROBOT)
        entries.append(extra)
        patches[len(entries) - 1] = separable_patches('empty_painting', {B: 4}, seed=9)
        with self.assertLogs('apps.evaluation.crossval', level='WARNING'):
            result = single_patch_regime(entries, ModelConfig.tiny(), quick_config(epochs=2), 2, patches_by_entry=patches)
        self.assertEqual(result.skipped, ['empty_painting'])
        self.assertEqual(len(result.accuracies), 2)
