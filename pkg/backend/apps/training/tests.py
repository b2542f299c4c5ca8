"""
Tests for the Training App

Run tests with: python manage.py test apps.training
"""

import json
import tempfile
from pathlib import Path
from unittest.mock import patch

import numpy as np
from django.test import SimpleTestCase, tag

from apps.core.exceptions import ConfigurationError, DivergenceError, LeakageError, NumericError, UsageError
from apps.network.config import ModelConfig
from apps.patches.extraction import PatchRecord
from apps.patches.labels import PatchLabel
from apps.tensor import ops
from apps.tensor.tensor import Tensor
from apps.training.config import TrainConfig
from apps.training.schedule import epoch_schedule, merge_singleton_tail
from apps.training.trainer import EpochRecord, select_checkpoint, train_fold, train_full
from apps.training.weights import compute_class_weights

LEVELS = {PatchLabel.BLANK: 1.0, PatchLabel.HUMAN: 0.2, PatchLabel.ROBOT: 0.6}


def separable_patches(painting_id, label_counts, seed, size=32):
    """Patches whose class is encoded in their mean intensity."""
    rng = np.random.default_rng(seed)
    patches = []
    for label, count in label_counts.items():
        for index in range(count):
            noise = rng.normal(0.0, 0.03, (size, size))
            pixels = np.clip(LEVELS[label] + noise, 0.0, 1.0).astype(np.float32)
            patches.append(PatchRecord(painting_id, index * 8, int(label) * 1000, size, label, pixels))
    return patches


def quick_config(**overrides):
    values = dict(lr=0.01, momentum=0.9, batch_size=16, epochs=30, seed=1, augmentation=None)
    values.update(overrides)
    return TrainConfig(**values)


class ClassWeightTests(SimpleTestCase):
    """Tests for compute_class_weights."""

    def test_published_counts(self):
        weights = compute_class_weights((17553, 60217, 59207), (0.01, 1.0, 0.75))
        self.assertAlmostEqual(weights.w_blank, 0.0780, delta=1e-3)
        self.assertAlmostEqual(weights.w_human, 2.2747, delta=1e-3)
        self.assertAlmostEqual(weights.w_robot, 1.7352, delta=1e-3)

    def test_equal_counts(self):
        weights = compute_class_weights((40, 40, 40), (1.0, 1.0, 1.0))
        np.testing.assert_allclose(weights.as_array(), [3.0, 3.0, 3.0])

    def test_unit_counts(self):
        weights = compute_class_weights((1, 1, 1))
        np.testing.assert_allclose(weights.as_array(), [0.03, 3.0, 2.25])

    def test_zero_count_rejected(self):
        with self.assertRaises(ConfigurationError):
            compute_class_weights((0, 5, 5))

    def test_zero_alpha_rejected(self):
        with self.assertRaises(ConfigurationError):
            compute_class_weights((5, 5, 5), (0.0, 1.0, 0.75))

    def test_present_only(self):
        with self.assertLogs('apps.training.weights', level='WARNING'):
            weights = compute_class_weights((4, 0, 6), present_only=True)
        self.assertEqual(weights.w_human, 0.0)
        self.assertAlmostEqual(weights.w_robot, 0.75 * 10 / 6)
        self.assertEqual(weights.loss_weights()[1], 1.0)

    def test_alpha_scaling_scales_loss_and_gradient(self):
        """Multiplying every alpha by c scales the loss and its gradient by c."""
        rng = np.random.default_rng(0)
        logits_data = rng.standard_normal((8, 3))
        targets = np.array([0, 1, 2, 1, 1, 2, 0, 2])
        counts = np.bincount(targets, minlength=3)
        results = []
        for scale in (1.0, 3.0):
            weights = compute_class_weights(counts, np.array([0.01, 1.0, 0.75]) * scale)
            logits = Tensor(logits_data.copy(), requires_grad=True)
            loss = ops.weighted_cross_entropy(logits, targets, weights.as_array())
            # the weighted mean is scale free, so compare the unnormalized sums
            total = loss.item() * weights.as_array()[targets].sum()
            loss.backward()
            results.append((total, logits.grad * weights.as_array()[targets].sum()))
        self.assertAlmostEqual(results[1][0], 3.0 * results[0][0])
        np.testing.assert_allclose(results[1][1], 3.0 * results[0][1])


class ScheduleTests(SimpleTestCase):
    """Tests for epoch_schedule."""

    def test_batch_sizes(self):
        self.assertEqual([len(b) for b in epoch_schedule(5, 2, 0, 1)], [2, 2, 1])

    def test_deterministic(self):
        first = np.concatenate(epoch_schedule(50, 8, 3, 4))
        np.testing.assert_array_equal(first, np.concatenate(epoch_schedule(50, 8, 3, 4)))
        self.assertFalse(np.array_equal(first, np.concatenate(epoch_schedule(50, 8, 3, 5))))

    def test_bijection(self):
        self.assertEqual(sorted(np.concatenate(epoch_schedule(10, 3, 9, 2)).tolist()), list(range(10)))

    def test_singleton_tail_merged(self):
        merged = merge_singleton_tail(epoch_schedule(5, 2, 0, 1))
        self.assertEqual([len(b) for b in merged], [2, 3])

    def test_empty_rejected(self):
        with self.assertRaises(ConfigurationError):
            epoch_schedule(0, 2, 0, 1)


class SelectCheckpointTests(SimpleTestCase):
    """Tests for select_checkpoint."""

    def test_earliest_epoch_on_ties(self):
        history = [EpochRecord('f', epoch, 1.0, acc) for epoch, acc in [(1, 0.2), (5, 0.9), (7, 0.5), (9, 0.9)]]
        self.assertEqual(select_checkpoint(history).epoch, 5)

    def test_unevaluated_epochs_skipped(self):
        history = [EpochRecord('f', 1, 1.0), EpochRecord('f', 2, 0.5, 0.4)]
        self.assertEqual(select_checkpoint(history).epoch, 2)


class TrainFoldTests(SimpleTestCase):
    """Tests for train_fold."""

    def setUp(self):
        self.train = (
            separable_patches('human_a', {PatchLabel.HUMAN: 14, PatchLabel.BLANK: 6}, 1)
            + separable_patches('robot_a', {PatchLabel.ROBOT: 14, PatchLabel.BLANK: 6}, 2)
            + separable_patches('human_b', {PatchLabel.HUMAN: 14, PatchLabel.BLANK: 6}, 3)
        )
        self.heldout = separable_patches('robot_b', {PatchLabel.ROBOT: 10, PatchLabel.BLANK: 4}, 4)

    def test_leakage_is_fatal(self):
        with self.assertRaises(LeakageError) as ctx:
            train_fold(self.train, self.train[:3], ModelConfig.tiny(), quick_config(), 'human_a')
        self.assertEqual(ctx.exception.overlap, ['human_a'])

    def test_empty_heldout(self):
        with self.assertRaises(UsageError):
            train_fold(self.train, [], ModelConfig.tiny(), quick_config())

    def test_single_training_patch(self):
        with self.assertRaises(ConfigurationError):
            train_fold(self.train[:1], self.heldout, ModelConfig.tiny(), quick_config())

    def test_batch_size_one_rejected(self):
        """Every batch of one would fail in batch norm, so the config refuses it up front."""
        with self.assertRaisesRegex(ConfigurationError, 'batch_size must be at least 2'):
            quick_config(batch_size=1)
        self.assertEqual(quick_config(batch_size=2).batch_size, 2)

    def test_divergence_reports_epoch_and_batch(self):
        with patch('apps.training.trainer.weighted_cross_entropy', side_effect=NumericError('nan logits')):
            with self.assertRaises(DivergenceError) as ctx:
                train_fold(self.train, self.heldout, ModelConfig.tiny(), quick_config())
        self.assertEqual((ctx.exception.epoch, ctx.exception.batch), (1, 0))

    def test_separable_fold(self):
        """Tiny model separates the synthetic classes on a held-out painting."""
        with tempfile.TemporaryDirectory() as tmp:
            log_path = Path(tmp) / 'fold.jsonl'
            checkpoint = train_fold(self.train, self.heldout, ModelConfig.tiny(), quick_config(), 'robot_b', log_path)
            lines = [json.loads(line) for line in log_path.read_text().splitlines()]
        self.assertGreaterEqual(checkpoint.val_accuracy, 0.99)
        self.assertEqual(len(lines), 30)
        self.assertEqual(set(lines[0]), {'fold', 'epoch', 'train_loss', 'val_accuracy'})
        evaluated = [r.val_accuracy for r in checkpoint.history if r.val_accuracy is not None]
        self.assertEqual(checkpoint.val_accuracy, max(evaluated))

    def test_checkpoint_round_trip_preserves_accuracy(self):
        from apps.training.trainer import Checkpoint, patch_accuracy
        checkpoint = train_fold(self.train, self.heldout, ModelConfig.tiny(), quick_config(epochs=4, eval_every=2), 'robot_b')
        self.assertEqual([r.epoch for r in checkpoint.history if r.val_accuracy is not None], [2, 4])
        with tempfile.TemporaryDirectory() as tmp:
            checkpoint.save(Path(tmp) / 'robot_b.bmck')
            loaded = Checkpoint.load(Path(tmp) / 'robot_b.bmck')
        self.assertEqual(patch_accuracy(loaded.to_network(), self.heldout), checkpoint.val_accuracy)
        self.assertEqual(loaded.epoch, checkpoint.epoch)

    def test_deterministic(self):
        config = quick_config(epochs=3, augmentation=TrainConfig().augmentation)
        first = train_fold(self.train, self.heldout, ModelConfig.tiny(), config, 'robot_b')
        second = train_fold(self.train, self.heldout, ModelConfig.tiny(), config, 'robot_b')
        self.assertEqual([r.train_loss for r in first.history], [r.train_loss for r in second.history])
        for name, array in first.state.items():
            np.testing.assert_array_equal(array, second.state[name])

    @tag('slow')
    def test_overfits_sixty_patches(self):
        """Tiny model reaches 100% training accuracy on 60 separable patches."""
        checkpoint = train_full(self.train, ModelConfig.tiny(), quick_config(epochs=200))
        self.assertEqual(checkpoint.val_accuracy, 1.0)
