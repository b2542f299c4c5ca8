"""
The attribution network assembled from apps.tensor primitives.

Each block is conv -> bn -> relu repeated convs_per_block times, then a 2x2
max pool. The head is dropout -> global average pool -> fully connected
layers -> logits for (Blank, Human, Robot).
"""

import logging
from collections import OrderedDict

import numpy as np

from apps.core.exceptions import ShapeError
from apps.core.seeding import rng_for
from apps.network.config import KERNEL_SIZE, ModelConfig
from apps.tensor import ops
from apps.tensor.tensor import Tensor

logger = logging.getLogger(__name__)

TRAIN = 'train'
EVAL = 'eval'


def kaiming_uniform(rng, shape, fan_in, dtype):
    bound = np.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


class Conv2d:
    def __init__(self, name, in_channels, out_channels, rng, dtype):
        fan_in = in_channels * KERNEL_SIZE * KERNEL_SIZE
        self.weight = Tensor(
            kaiming_uniform(rng, (out_channels, in_channels, KERNEL_SIZE, KERNEL_SIZE), fan_in, dtype),
            requires_grad=True, name=f'{name}.weight',
        )
        self.bias = Tensor(np.zeros(out_channels, dtype=dtype), requires_grad=True, name=f'{name}.bias')

    def parameters(self):
        return [self.weight, self.bias]

    def __call__(self, x, training, rng):
        return ops.conv2d(x, self.weight, self.bias, pad=1)


class BatchNorm2d:
    def __init__(self, name, channels, dtype):
        self.name = name
        self.gamma = Tensor(np.ones(channels, dtype=dtype), requires_grad=True, name=f'{name}.gamma')
        self.beta = Tensor(np.zeros(channels, dtype=dtype), requires_grad=True, name=f'{name}.beta')
        self.running = ops.RunningStats.for_channels(channels, dtype=dtype)

    def parameters(self):
        return [self.gamma, self.beta]

    def buffers(self):
        return OrderedDict([
            (f'{self.name}.running_mean', self.running.mean),
            (f'{self.name}.running_var', self.running.var),
        ])

    def __call__(self, x, training, rng):
        return ops.batchnorm(x, self.gamma, self.beta, self.running, training)


class ReLU:
    def parameters(self):
        return []

    def __call__(self, x, training, rng):
        return ops.relu(x)


class MaxPool2:
    def parameters(self):
        return []

    def __call__(self, x, training, rng):
        return ops.maxpool2(x)


class Dropout:
    def __init__(self, p):
        self.p = p

    def parameters(self):
        return []

    def __call__(self, x, training, rng):
        return ops.dropout(x, self.p, rng, training)


class GlobalAvgPool:
    def parameters(self):
        return []

    def __call__(self, x, training, rng):
        return ops.global_avg_pool(x)


class Linear:
    def __init__(self, name, in_features, out_features, rng, dtype):
        self.weight = Tensor(
            kaiming_uniform(rng, (out_features, in_features), in_features, dtype),
            requires_grad=True, name=f'{name}.weight',
        )
        self.bias = Tensor(np.zeros(out_features, dtype=dtype), requires_grad=True, name=f'{name}.bias')

    def parameters(self):
        return [self.weight, self.bias]

    def __call__(self, x, training, rng):
        return ops.linear(x, self.weight, self.bias)


class Network:
    """
    Ordered layer list plus mode.

    Attributes:
        config: ModelConfig
        layers: list of layer objects, forward order
        mode: 'train' or 'eval'
    """

    def __init__(self, config, seed=0, dtype=np.float32):
        self.config = config
        self.seed = seed
        self.dtype = np.dtype(dtype)
        self.mode = EVAL
        self._dropout_rng = rng_for('dropout', seed)
        rng = rng_for('init', seed)

        layers = []
        channels = config.in_channels
        for block_index, out_channels in enumerate(config.block_channels, start=1):
            for conv_index in range(1, config.convs_per_block + 1):
                layers.append(Conv2d(f'block{block_index}.conv{conv_index}', channels, out_channels, rng, self.dtype))
                layers.append(BatchNorm2d(f'block{block_index}.bn{conv_index}', out_channels, self.dtype))
                layers.append(ReLU())
                channels = out_channels
            layers.append(MaxPool2())
        layers.append(Dropout(config.dropout_p))
        layers.append(GlobalAvgPool())
        widths = [channels, *config.fc_dims, config.num_classes]
        for fc_index, (in_features, out_features) in enumerate(zip(widths, widths[1:]), start=1):
            layers.append(Linear(f'fc{fc_index}', in_features, out_features, rng, self.dtype))
        self.layers = layers

    def __repr__(self):
        return f'<Network blocks={list(self.config.block_channels)} input={self.config.input_size} mode={self.mode}>'

    def train(self):
        self.mode = TRAIN
        return self

    def eval(self):
        self.mode = EVAL
        return self

    @property
    def training(self):
        return self.mode == TRAIN

    def parameters(self):
        return [param for layer in self.layers for param in layer.parameters()]

    def buffers(self):
        buffers = OrderedDict()
        for layer in self.layers:
            if isinstance(layer, BatchNorm2d):
                buffers.update(layer.buffers())
        return buffers

    def zero_grad(self):
        for param in self.parameters():
            param.zero_grad()

    def forward(self, batch, rng=None):
        """
        Args:
            batch: Tensor or array [N, 1, S, S] with S == config.input_size
            rng: Dropout stream for train mode (defaults to the network's own)

        Returns:
            Tensor [N, num_classes] of logits
        """
        x = batch if isinstance(batch, Tensor) else Tensor(np.asarray(batch, dtype=self.dtype))
        size = self.config.input_size
        if x.data.ndim != 4 or x.shape[1] != self.config.in_channels or x.shape[2:] != (size, size):
            raise ShapeError(
                f'Network expects [N, {self.config.in_channels}, {size}, {size}], got {tuple(x.shape)}'
            )
        rng = rng or self._dropout_rng
        for layer in self.layers:
            x = layer(x, self.training, rng)
        return x

    __call__ = forward

    def predict_proba(self, pixels, batch_size=32):
        """Eval-mode softmax posteriors [N, num_classes] as float64."""
        pixels = np.asarray(pixels, dtype=self.dtype)
        previous = self.mode
        self.eval()
        try:
            chunks = [
                ops.softmax(self.forward(pixels[start:start + batch_size]).data)
                for start in range(0, len(pixels), batch_size)
            ]
        finally:
            self.mode = previous
        if not chunks:
            return np.zeros((0, self.config.num_classes))
        return np.concatenate(chunks)

    def predict(self, pixels, batch_size=32):
        return self.predict_proba(pixels, batch_size).argmax(axis=1)

    def state_dict(self):
        """Parameters in declaration order, then batch-norm running statistics (copies)."""
        state = OrderedDict((param.name, param.data.copy()) for param in self.parameters())
        state.update((name, array.copy()) for name, array in self.buffers().items())
        return state

    def load_state_dict(self, state):
        params = {param.name: param for param in self.parameters()}
        buffers = self.buffers()
        expected = list(params) + list(buffers)
        if list(state) != expected:
            missing = sorted(set(expected) - set(state))
            unexpected = sorted(set(state) - set(expected))
            raise ShapeError(f'State does not match the network (missing {missing}, unexpected {unexpected})')
        for name, array in state.items():
            target = params[name].data if name in params else buffers[name]
            if target.shape != np.shape(array):
                raise ShapeError(f'{name}: expected shape {target.shape}, got {np.shape(array)}')
            target[...] = array
        return self


def build(config=None, seed=0, dtype=np.float32):
    """Build a freshly initialized Network (Kaiming-uniform weights, zero biases)."""
    config = config or ModelConfig()
    network = Network(config, seed=seed, dtype=dtype)
    logger.debug('Built %r', network)
    return network
