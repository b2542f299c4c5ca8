"""
Tests for the Network App

Run tests with: python manage.py test apps.network
"""

import numpy as np
from django.test import SimpleTestCase

from apps.core.exceptions import ConfigurationError, ShapeError
from apps.network.config import (
    ModelConfig, conv_block_params, count_params, linear_params, normalize_scale, trace_shapes,
)
from apps.network.network import build
from apps.tensor import ops
from apps.tensor.gradcheck import TOLERANCE, check_gradients
from apps.tensor.tensor import Tensor


class ModelConfigTests(SimpleTestCase):
    """Tests for ModelConfig and shape tracing."""

    def test_default_shape_chain(self):
        self.assertEqual(trace_shapes(ModelConfig()), [300, 150, 75, 37, 18, 9])

    def test_tiny_shape_chain(self):
        self.assertEqual(trace_shapes(ModelConfig.tiny()), [32, 16, 8])

    def test_input_too_small(self):
        with self.assertRaises(ConfigurationError):
            ModelConfig(input_size=31)

    def test_num_classes_fixed(self):
        with self.assertRaises(ConfigurationError):
            ModelConfig(num_classes=4)

    def test_scales(self):
        self.assertEqual(ModelConfig.for_scale('paper', 300), ModelConfig.full())
        self.assertEqual(ModelConfig.for_scale('full', 300), ModelConfig.full())
        self.assertEqual(ModelConfig.for_scale('tiny', 64).block_channels, (8, 16, 32, 32))
        self.assertEqual(normalize_scale(' Full '), 'paper')
        with self.assertRaises(ConfigurationError):
            normalize_scale('huge')

    def test_dict_round_trip(self):
        config = ModelConfig.tiny_for_patches(300)
        self.assertEqual(ModelConfig.from_dict(config.to_dict()), config)


class CountParamsTests(SimpleTestCase):
    """Tests for count_params."""

    def test_single_fc_layer(self):
        self.assertEqual(linear_params(128, 3), 387)

    def test_one_conv_block(self):
        self.assertEqual(conv_block_params(1, 8, 2), 696)

    def test_default_total(self):
        """Regression constant from a per-layer summation."""
        self.assertEqual(count_params(ModelConfig()), 5_044_323)

    def test_matches_built_network(self):
        config = ModelConfig.tiny()
        network = build(config)
        self.assertEqual(sum(p.size for p in network.parameters()), count_params(config))


class ForwardTests(SimpleTestCase):
    """Tests for Network.forward."""

    def setUp(self):
        self.config = ModelConfig.tiny()
        self.batch = np.random.default_rng(0).random((4, 1, 32, 32)).astype(np.float32)

    def test_logit_shape(self):
        self.assertEqual(build(self.config).forward(self.batch).shape, (4, 3))

    def test_eval_is_deterministic(self):
        network = build(self.config, seed=3).eval()
        first = network.forward(self.batch).data
        network._dropout_rng.random(100)
        np.testing.assert_array_equal(network.forward(self.batch).data, first)

    def test_same_seed_same_weights(self):
        a, b = build(self.config, seed=5), build(self.config, seed=5)
        for pa, pb in zip(a.parameters(), b.parameters()):
            np.testing.assert_array_equal(pa.data, pb.data)

    def test_wrong_spatial_size(self):
        with self.assertRaises(ShapeError):
            build(self.config).forward(np.zeros((1, 1, 30, 30), dtype=np.float32))

    def test_initialization(self):
        network = build(self.config)
        for param in network.parameters():
            if param.name.endswith('.bias') or param.name.endswith('.beta'):
                self.assertFalse(np.any(param.data))
            elif param.name.endswith('.gamma'):
                np.testing.assert_array_equal(param.data, 1.0)
        conv = network.parameters()[0]
        self.assertLessEqual(np.abs(conv.data).max(), np.sqrt(6.0 / 9) + 1e-6)

    def test_layerwise_replay(self):
        """Eval-mode logits equal a forward pass rebuilt from the primitives."""
        network = build(self.config, seed=1, dtype=np.float64).eval()
        params = {p.name: p for p in network.parameters()}
        buffers = network.buffers()
        x = Tensor(self.batch.astype(np.float64))
        for block in (1, 2):
            for conv in (1, 2):
                prefix = f'block{block}'
                x = ops.conv2d(x, params[f'{prefix}.conv{conv}.weight'], params[f'{prefix}.conv{conv}.bias'])
                stats = ops.RunningStats(
                    mean=buffers[f'{prefix}.bn{conv}.running_mean'].copy(),
                    var=buffers[f'{prefix}.bn{conv}.running_var'].copy(),
                )
                x = ops.batchnorm(x, params[f'{prefix}.bn{conv}.gamma'], params[f'{prefix}.bn{conv}.beta'], stats, False)
                x = ops.relu(x)
            x = ops.maxpool2(x)
        self.assertEqual(x.shape[2:], (8, 8))
        x = ops.global_avg_pool(x)
        self.assertEqual(x.shape, (4, 16))
        for fc in (1, 2, 3):
            x = ops.linear(x, params[f'fc{fc}.weight'], params[f'fc{fc}.bias'])
        np.testing.assert_allclose(network.forward(self.batch).data, x.data, rtol=1e-12)

    def test_predict_proba_batches(self):
        network = build(self.config)
        probs = network.predict_proba(self.batch, batch_size=3)
        self.assertEqual(probs.shape, (4, 3))
        np.testing.assert_allclose(probs.sum(axis=1), 1.0)
        np.testing.assert_allclose(probs, network.predict_proba(self.batch, batch_size=4), rtol=1e-6)

    def test_state_dict_round_trip(self):
        source = build(self.config, seed=1)
        source.train().forward(self.batch)
        target = build(self.config, seed=2).load_state_dict(source.state_dict())
        np.testing.assert_array_equal(target.eval().forward(self.batch).data, source.eval().forward(self.batch).data)
        self.assertTrue(list(source.state_dict())[-1].endswith('running_var'))


class EndToEndGradientTests(SimpleTestCase):
    """Gradient check through the whole tiny network."""

    def test_tiny_network_gradients(self):
        config = ModelConfig.tiny()
        for seed in range(5):
            network = build(config, seed=seed, dtype=np.float64).train()
            rng = np.random.default_rng(seed)
            x = Tensor(rng.random((2, 1, 32, 32)), requires_grad=True, name='input')
            targets = rng.integers(0, 3, size=2)

            def loss():
                logits = network.forward(x, rng=np.random.default_rng(100 + seed))
                return ops.weighted_cross_entropy(logits, targets, [0.5, 1.0, 2.0])

            errors = check_gradients(loss, [x, *network.parameters()], sample=6, rng=rng)
            for name, error in errors.items():
                self.assertLess(error, TOLERANCE, msg=f'seed {seed}: {name}')
