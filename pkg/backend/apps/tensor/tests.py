"""
Tests for the Tensor App

Run tests with: python manage.py test apps.tensor
"""

import math
import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from apps.core.exceptions import ConfigurationError, FormatError, NumericError, ShapeError
from apps.tensor import ops
from apps.tensor.gradcheck import TOLERANCE, check_gradients, max_relative_error
from apps.tensor.tensor import Tensor


def param(rng, *shape, name=''):
    return Tensor(rng.standard_normal(shape), requires_grad=True, name=name)


class Conv2dTests(SimpleTestCase):
    """Tests for conv2d."""

    def test_zero_input_gives_zero_output(self):
        """Zero input with zero bias produces zeros."""
        rng = np.random.default_rng(0)
        out = ops.conv2d(Tensor(np.zeros((1, 1, 3, 3))), param(rng, 1, 1, 3, 3), Tensor(np.zeros(1)))
        np.testing.assert_array_equal(out.data, np.zeros((1, 1, 3, 3)))

    def test_identity_kernel_returns_input(self):
        """Centered identity kernel with pad=1 reproduces the input."""
        x = np.random.default_rng(1).random((2, 1, 5, 4))
        kernel = np.zeros((1, 1, 3, 3))
        kernel[0, 0, 1, 1] = 1.0
        out = ops.conv2d(Tensor(x), Tensor(kernel), Tensor(np.zeros(1)), pad=1)
        np.testing.assert_allclose(out.data, x)

    def test_all_ones_valid_convolution(self):
        """Ones input and ones kernel with pad=0 sum the nine taps."""
        out = ops.conv2d(Tensor(np.ones((1, 1, 3, 3))), Tensor(np.ones((1, 1, 3, 3))), Tensor(np.zeros(1)), pad=0)
        self.assertEqual(out.shape, (1, 1, 1, 1))
        self.assertEqual(out.data[0, 0, 0, 0], 9.0)

    def test_channel_mismatch(self):
        """Input and kernel channel counts must agree."""
        with self.assertRaises(ShapeError):
            ops.conv2d(Tensor(np.zeros((1, 2, 4, 4))), Tensor(np.zeros((1, 3, 3, 3))), Tensor(np.zeros(1)))

    def test_cross_correlation_convention(self):
        """The kernel is not flipped."""
        x = np.zeros((1, 1, 3, 3))
        x[0, 0, 0, 0] = 1.0
        kernel = np.arange(9, dtype=float).reshape(1, 1, 3, 3)
        out = ops.conv2d(Tensor(x), Tensor(kernel), Tensor(np.zeros(1)), pad=0)
        self.assertEqual(out.data[0, 0, 0, 0], 0.0)

    def test_gradients(self):
        """conv2d gradients match central differences for input, kernel and bias."""
        for seed in range(5):
            rng = np.random.default_rng(seed)
            x, w, b = param(rng, 2, 2, 5, 4), param(rng, 3, 2, 3, 3), param(rng, 3)
            upstream = rng.standard_normal((2, 3, 5, 4))
            errors = check_gradients(lambda: _weighted_sum(ops.conv2d(x, w, b, pad=1), upstream), [x, w, b])
            for name, error in errors.items():
                self.assertLess(error, TOLERANCE, msg=f'seed {seed} tensor {name}')


def _weighted_sum(tensor, upstream):
    """Scalar projection so non-scalar ops can be gradient-checked."""
    out = np.asarray((tensor.data * upstream).sum())

    def backward(grad):
        return (grad * upstream,)

    return Tensor.from_op(out, (tensor,), backward, 'weighted_sum')


class MaxPoolTests(SimpleTestCase):
    """Tests for maxpool2."""

    def test_window_maximum(self):
        out = ops.maxpool2(Tensor(np.array([[[[1.0, 2.0], [3.0, 4.0]]]])))
        self.assertEqual(out.data.reshape(-1).tolist(), [4.0])

    def test_tie_routes_gradient_to_first_element(self):
        """Constant windows send the whole gradient to the top-left element."""
        x = Tensor(np.full((1, 1, 4, 4), 2.5), requires_grad=True)
        out = ops.maxpool2(x)
        np.testing.assert_array_equal(out.data, np.full((1, 1, 2, 2), 2.5))
        out.backward()
        expected = np.zeros((4, 4))
        expected[::2, ::2] = 1.0
        np.testing.assert_array_equal(x.grad[0, 0], expected)

    def test_odd_size_floors(self):
        """A 75-row input pools to 37 rows."""
        out = ops.maxpool2(Tensor(np.zeros((1, 1, 75, 9))))
        self.assertEqual(out.shape, (1, 1, 37, 4))

    def test_too_small(self):
        with self.assertRaises(ShapeError):
            ops.maxpool2(Tensor(np.zeros((1, 1, 1, 4))))

    def test_gradients(self):
        """maxpool2 gradients match central differences on tie-free input."""
        rng = np.random.default_rng(3)
        x = Tensor(rng.permutation(2 * 2 * 5 * 6).reshape(2, 2, 5, 6) * 0.1, requires_grad=True)
        upstream = rng.standard_normal((2, 2, 2, 3))
        errors = check_gradients(lambda: _weighted_sum(ops.maxpool2(x), upstream), [x])
        self.assertLess(max(errors.values()), TOLERANCE)


class BatchNormTests(SimpleTestCase):
    """Tests for batchnorm."""

    def test_normalized_batch_is_unchanged(self):
        """gamma=1, beta=0 on standardized data returns the input up to epsilon."""
        rng = np.random.default_rng(4)
        x = rng.standard_normal((4, 2, 3, 3))
        x = (x - x.mean(axis=(0, 2, 3), keepdims=True)) / x.std(axis=(0, 2, 3), keepdims=True)
        stats = ops.RunningStats.for_channels(2)
        out = ops.batchnorm(Tensor(x), Tensor(np.ones(2)), Tensor(np.zeros(2)), stats, training=True)
        np.testing.assert_allclose(out.data, x, atol=1e-4)

    def test_zero_gamma_gives_beta(self):
        rng = np.random.default_rng(5)
        stats = ops.RunningStats.for_channels(3)
        beta = np.array([0.5, -1.0, 2.0])
        out = ops.batchnorm(Tensor(rng.random((2, 3, 4, 4))), Tensor(np.zeros(3)), Tensor(beta), stats, training=True)
        np.testing.assert_allclose(out.data, np.broadcast_to(beta[None, :, None, None], out.shape))

    def test_train_mode_moments(self):
        """Per-channel output moments are 0 and 1, recomputed with a two-pass routine."""
        rng = np.random.default_rng(6)
        stats = ops.RunningStats.for_channels(3)
        out = ops.batchnorm(Tensor(rng.random((4, 3, 5, 5)) * 7 + 2), Tensor(np.ones(3)), Tensor(np.zeros(3)), stats, training=True)
        for channel in range(3):
            values = out.data[:, channel].reshape(-1)
            mean = sum(values) / len(values)
            variance = sum((v - mean) ** 2 for v in values) / len(values)
            self.assertAlmostEqual(mean, 0.0, places=7)
            self.assertAlmostEqual(variance, 1.0, places=3)

    def test_running_stats_update(self):
        """Running stats follow a 0.1-momentum moving average of the unbiased variance."""
        rng = np.random.default_rng(7)
        x = rng.random((3, 1, 2, 2))
        stats = ops.RunningStats.for_channels(1)
        ops.batchnorm(Tensor(x), Tensor(np.ones(1)), Tensor(np.zeros(1)), stats, training=True)
        self.assertAlmostEqual(stats.mean[0], 0.1 * x.mean())
        self.assertAlmostEqual(stats.var[0], 0.9 + 0.1 * x.var(ddof=1))

    def test_eval_mode_uses_running_stats(self):
        stats = ops.RunningStats(mean=np.array([1.0]), var=np.array([4.0]))
        out = ops.batchnorm(Tensor(np.full((1, 1, 2, 2), 5.0)), Tensor(np.ones(1)), Tensor(np.zeros(1)), stats, training=False)
        np.testing.assert_allclose(out.data, 4.0 / math.sqrt(4.0 + 1e-5))

    def test_single_sample_in_train_mode(self):
        stats = ops.RunningStats.for_channels(1)
        with self.assertRaises(ConfigurationError):
            ops.batchnorm(Tensor(np.zeros((1, 1, 2, 2))), Tensor(np.ones(1)), Tensor(np.zeros(1)), stats, training=True)

    def test_gradients(self):
        for seed in range(5):
            rng = np.random.default_rng(seed)
            x, gamma, beta = param(rng, 3, 2, 3, 3), param(rng, 2), param(rng, 2)
            stats = ops.RunningStats.for_channels(2)
            upstream = rng.standard_normal((3, 2, 3, 3))
            errors = check_gradients(
                lambda: _weighted_sum(ops.batchnorm(x, gamma, beta, stats, training=True), upstream),
                [x, gamma, beta],
            )
            self.assertLess(max(errors.values()), TOLERANCE, msg=f'seed {seed}')


class ElementwiseTests(SimpleTestCase):
    """Tests for relu, dropout, global_avg_pool and linear."""

    def test_relu(self):
        out = ops.relu(Tensor(np.array([-1.0, 0.0, 2.0])))
        self.assertEqual(out.data.tolist(), [0.0, 0.0, 2.0])

    def test_dropout_zero_is_identity(self):
        x = Tensor(np.arange(6.0).reshape(2, 3))
        rng = np.random.default_rng(0)
        for training in (True, False):
            np.testing.assert_array_equal(ops.dropout(x, 0.0, rng, training).data, x.data)

    def test_dropout_eval_is_identity(self):
        x = Tensor(np.arange(6.0).reshape(2, 3))
        np.testing.assert_array_equal(ops.dropout(x, 0.4, np.random.default_rng(0), False).data, x.data)

    def test_dropout_rejects_bad_probability(self):
        x = Tensor(np.ones(3))
        for p in (-0.1, 1.0, 1.5):
            with self.assertRaises(ConfigurationError):
                ops.dropout(x, p, np.random.default_rng(0), True)

    def test_dropout_expectation(self):
        """Monte-Carlo mean of train-mode output is within 3 standard errors of the input."""
        rng = np.random.default_rng(11)
        x = Tensor(np.full(20000, 2.0))
        out = ops.dropout(x, 0.4, rng, True).data
        standard_error = out.std() / math.sqrt(out.size)
        self.assertLess(abs(out.mean() - 2.0), 3 * standard_error)

    def test_global_avg_pool_constant_channels(self):
        x = np.zeros((1, 2, 3, 3))
        x[0, 0] = 4.0
        x[0, 1] = -2.0
        self.assertEqual(ops.global_avg_pool(Tensor(x)).data.tolist(), [[4.0, -2.0]])

    def test_linear_and_pool_gradients(self):
        rng = np.random.default_rng(12)
        x, w, b = param(rng, 3, 4, 2, 2), param(rng, 5, 4), param(rng, 5)
        upstream = rng.standard_normal((3, 5))
        errors = check_gradients(
            lambda: _weighted_sum(ops.linear(ops.global_avg_pool(x), w, b), upstream), [x, w, b]
        )
        self.assertLess(max(errors.values()), TOLERANCE)

    def test_relu_gradient(self):
        rng = np.random.default_rng(13)
        x = Tensor(rng.uniform(0.1, 1.0, 10) * rng.choice([-1.0, 1.0], 10), requires_grad=True)
        upstream = rng.standard_normal(10)
        errors = check_gradients(lambda: _weighted_sum(ops.relu(x), upstream), [x])
        self.assertLess(max(errors.values()), TOLERANCE)

    def test_linear_width_mismatch(self):
        with self.assertRaises(ShapeError):
            ops.linear(Tensor(np.zeros((2, 3))), Tensor(np.zeros((4, 5))), Tensor(np.zeros(4)))


class WeightedCrossEntropyTests(SimpleTestCase):
    """Tests for weighted_cross_entropy."""

    def test_uniform_logits(self):
        for target in range(3):
            loss = ops.weighted_cross_entropy(Tensor(np.zeros((1, 3))), [target], [1.0, 1.0, 1.0])
            self.assertAlmostEqual(loss.item(), math.log(3), places=10)

    def test_saturated_correct(self):
        loss = ops.weighted_cross_entropy(Tensor(np.array([[100.0, 0.0, 0.0]])), [0], [1.0, 1.0, 1.0])
        self.assertAlmostEqual(loss.item(), 0.0, places=10)

    def test_weighted_mean(self):
        """Two samples with weights 1 and 2 combine as a weighted mean."""
        logits = np.array([[1.0, 2.0, 0.5], [0.2, -1.0, 3.0]])
        targets = [0, 1]
        weights = [1.0, 2.0, 5.0]
        per_sample = []
        for row, target in zip(logits, targets):
            log_z = math.log(sum(math.exp(v) for v in row))
            per_sample.append(log_z - row[target])
        expected = (1.0 * per_sample[0] + 2.0 * per_sample[1]) / 3.0
        loss = ops.weighted_cross_entropy(Tensor(logits), targets, weights)
        self.assertAlmostEqual(loss.item(), expected, places=10)

    def test_non_finite_logits(self):
        with self.assertRaises(NumericError):
            ops.weighted_cross_entropy(Tensor(np.array([[np.nan, 0.0, 0.0]])), [0], [1.0, 1.0, 1.0])

    def test_non_positive_weights(self):
        with self.assertRaises(ConfigurationError):
            ops.weighted_cross_entropy(Tensor(np.zeros((1, 3))), [0], [0.0, 1.0, 1.0])

    def test_gradient(self):
        rng = np.random.default_rng(14)
        logits = param(rng, 6, 3)
        targets = rng.integers(0, 3, size=6)
        errors = check_gradients(lambda: ops.weighted_cross_entropy(logits, targets, [0.5, 2.0, 1.5]), [logits])
        self.assertLess(max(errors.values()), TOLERANCE)


class SgdMomentumTests(SimpleTestCase):
    """Tests for sgd_momentum_step."""

    def test_single_step(self):
        from apps.tensor.optim import OptimizerState, sgd_momentum_step
        p = Tensor(np.array([1.0]), requires_grad=True)
        state = OptimizerState.for_parameters([p], lr=0.1, momentum=0.9)
        sgd_momentum_step([p], [np.array([0.5])], state)
        self.assertAlmostEqual(state.velocity[0][0], 0.5)
        self.assertAlmostEqual(p.data[0], 0.95)

    def test_zero_gradient_is_fixed_point(self):
        from apps.tensor.optim import OptimizerState, sgd_momentum_step
        p = Tensor(np.array([3.0, -1.0]), requires_grad=True)
        state = OptimizerState.for_parameters([p], lr=0.1, momentum=0.9)
        for _ in range(5):
            sgd_momentum_step([p], [np.zeros(2)], state)
        self.assertEqual(p.data.tolist(), [3.0, -1.0])

    def test_two_steps_unrolled(self):
        """Constant g=1, lr=1, momentum=0.5: v2 = 1.5 and total change -2.5."""
        from apps.tensor.optim import OptimizerState, sgd_momentum_step
        p = Tensor(np.array([0.0]), requires_grad=True)
        state = OptimizerState.for_parameters([p], lr=1.0, momentum=0.5)
        sgd_momentum_step([p], [np.array([1.0])], state)
        sgd_momentum_step([p], [np.array([1.0])], state)
        self.assertAlmostEqual(state.velocity[0][0], 1.5)
        self.assertAlmostEqual(p.data[0], -2.5)

    def test_shape_mismatch(self):
        from apps.tensor.optim import OptimizerState, sgd_momentum_step
        p = Tensor(np.zeros(3), requires_grad=True)
        state = OptimizerState.for_parameters([p], lr=0.1, momentum=0.9)
        with self.assertRaises(ShapeError):
            sgd_momentum_step([p], [np.zeros(4)], state)


class AutodiffTests(SimpleTestCase):
    """Graph traversal and determinism."""

    def test_shared_parent_accumulates(self):
        """A weight used by two layers receives the sum of both gradient paths."""
        x = Tensor(np.array([[1.0, -2.0]]), requires_grad=True)
        w = Tensor(np.eye(2), requires_grad=True)
        b = Tensor(np.zeros(2))
        y = ops.linear(x, w, b)
        z = ops.linear(y, w, b)
        _weighted_sum(z, np.ones((1, 2))).backward()
        np.testing.assert_allclose(x.grad, [[1.0, 1.0]])
        np.testing.assert_allclose(w.grad, [[2.0, -4.0], [2.0, -4.0]])

    def test_deterministic_backward(self):
        def run():
            rng = np.random.default_rng(21)
            x, w, b = param(rng, 2, 1, 4, 4), param(rng, 2, 1, 3, 3), param(rng, 2)
            out = _weighted_sum(ops.conv2d(x, w, b), np.ones((2, 2, 4, 4)))
            out.backward()
            return out.data.tobytes(), w.grad.tobytes()
        self.assertEqual(run(), run())

    def test_max_relative_error(self):
        self.assertEqual(max_relative_error([1.0, 2.0], [1.0, 2.0]), 0.0)
        self.assertAlmostEqual(max_relative_error([1.0, 4.0], [1.0, 3.0]), 0.25)

    def test_non_finite_forward_raises(self):
        with self.assertRaises(NumericError):
            ops.relu(Tensor(np.array([np.inf])))


class CheckpointFormatTests(SimpleTestCase):
    """Tests for the binary checkpoint layout."""

    def test_save_and_load(self):
        from apps.tensor.checkpoint import load_checkpoint, save_checkpoint
        tensors = {
            'block1.conv1.weight': np.arange(8 * 9, dtype=np.float32).reshape(8, 1, 3, 3),
            'block1.bn1.running_var': np.ones(8, dtype=np.float32),
        }
        with tempfile.TemporaryDirectory() as tmp:
            path = save_checkpoint(Path(tmp) / 'fold.bmck', tensors, 7, 0.875, 'human_painting_1', {'a': 1})
            loaded = load_checkpoint(path)
        self.assertEqual(list(loaded.tensors), list(tensors))
        np.testing.assert_array_equal(loaded.tensors['block1.conv1.weight'], tensors['block1.conv1.weight'])
        self.assertEqual((loaded.epoch, loaded.val_accuracy, loaded.fold_id), (7, 0.875, 'human_painting_1'))
        self.assertEqual(loaded.config, {'a': 1})

    def test_header_layout(self):
        """Magic, version, then the 32-byte digest."""
        from apps.tensor.checkpoint import config_digest, encode_checkpoint
        payload = encode_checkpoint({}, 1, 0.5, '', {'k': 'v'})
        self.assertEqual(payload[:4], b'BMCK')
        self.assertEqual(payload[4], 1)
        self.assertEqual(payload[5:37], config_digest({'k': 'v'}))

    def test_rejects_bad_magic(self):
        from apps.tensor.checkpoint import decode_checkpoint
        with self.assertRaises(FormatError):
            decode_checkpoint(b'NOPE' + b'\x00' * 64)

    def test_rejects_truncation(self):
        from apps.tensor.checkpoint import decode_checkpoint, encode_checkpoint
        payload = encode_checkpoint({'w': np.ones((2, 2), dtype=np.float32)}, 1, 0.5, 'f', {})
        with self.assertRaises(FormatError):
            decode_checkpoint(payload[:-3])
