"""
Differentiable operations for the attribution network.

Only the layer set the classifier needs is provided: 3x3 convolution,
2x2 max pooling, batch normalization, ReLU, inverted dropout, global average
pooling, fully connected layers and a class-weighted cross-entropy loss.

Layout conventions:
    images   [N, C, H, W]
    kernels  [F, C, 3, 3] (cross-correlation, stride 1)
    linear   weight [out, in], bias [out]
"""

from dataclasses import dataclass

import numpy as np

from apps.core.exceptions import ConfigurationError, NumericError, ShapeError, UsageError
from apps.tensor.tensor import Tensor, check_finite

BN_EPSILON = 1e-5
BN_MOMENTUM = 0.1


def _require_rank(tensor, rank, op):
    if tensor.data.ndim != rank:
        raise ShapeError(f'{op} expects a rank-{rank} tensor, got shape {tuple(tensor.shape)}')


def conv2d(x, kernel, bias, pad=1):
    """
    3x3 cross-correlation with stride 1.

    Args:
        x: Tensor [N, C, H, W]
        kernel: Tensor [F, C, 3, 3]
        bias: Tensor [F]
        pad: 0 or 1 (zero padding on every border)

    Returns:
        Tensor [N, F, H + 2*pad - 2, W + 2*pad - 2]
    """
    _require_rank(x, 4, 'conv2d')
    _require_rank(kernel, 4, 'conv2d')
    if pad not in (0, 1):
        raise ConfigurationError(f'conv2d padding must be 0 or 1, got {pad}')
    if kernel.shape[2:] != (3, 3):
        raise ShapeError(f'conv2d kernel must be 3x3, got {kernel.shape[2:]}')
    n, channels, height, width = x.shape
    filters = kernel.shape[0]
    if kernel.shape[1] != channels:
        raise ShapeError(
            f'conv2d channel mismatch: input has {channels} channels, kernel expects {kernel.shape[1]}'
        )
    if bias.shape != (filters,):
        raise ShapeError(f'conv2d bias must have shape ({filters},), got {tuple(bias.shape)}')

    out_h = height + 2 * pad - 2
    out_w = width + 2 * pad - 2
    if out_h < 1 or out_w < 1:
        raise ShapeError(f'conv2d input {height}x{width} too small for a 3x3 kernel with pad={pad}')

    padded = np.pad(x.data, ((0, 0), (0, 0), (pad, pad), (pad, pad))) if pad else x.data
    w = kernel.data

    # One tensordot per kernel tap keeps memory at the size of the output.
    out = np.zeros((filters, n, out_h, out_w), dtype=np.result_type(x.data, w))
    for i in range(3):
        for j in range(3):
            window = padded[:, :, i:i + out_h, j:j + out_w]
            out += np.tensordot(w[:, :, i, j], window, axes=([1], [1]))
    out = out.transpose(1, 0, 2, 3) + bias.data[None, :, None, None]
    out = np.ascontiguousarray(out)

    def backward(grad):
        grad_padded = np.zeros_like(padded)
        grad_kernel = np.zeros_like(w)
        for i in range(3):
            for j in range(3):
                window = padded[:, :, i:i + out_h, j:j + out_w]
                grad_kernel[:, :, i, j] = np.tensordot(grad, window, axes=([0, 2, 3], [0, 2, 3]))
                grad_padded[:, :, i:i + out_h, j:j + out_w] += np.einsum(
                    'nfhw,fc->nchw', grad, w[:, :, i, j]
                )
        grad_x = grad_padded[:, :, pad:pad + height, pad:pad + width] if pad else grad_padded
        grad_bias = grad.sum(axis=(0, 2, 3))
        return grad_x, grad_kernel, grad_bias

    return Tensor.from_op(out, (x, kernel, bias), backward, 'conv2d')


def maxpool2(x):
    """
    2x2 max pooling with stride 2.

    A trailing odd row or column is dropped. The gradient of each window goes
    to its first maximal element in row-major order.
    """
    _require_rank(x, 4, 'maxpool2')
    n, channels, height, width = x.shape
    if height < 2 or width < 2:
        raise ShapeError(f'maxpool2 needs H, W >= 2, got {height}x{width}')
    out_h, out_w = height // 2, width // 2

    cropped = x.data[:, :, :2 * out_h, :2 * out_w]
    windows = cropped.reshape(n, channels, out_h, 2, out_w, 2).transpose(0, 1, 2, 4, 3, 5)
    windows = windows.reshape(n, channels, out_h, out_w, 4)
    argmax = windows.argmax(axis=-1)
    out = np.take_along_axis(windows, argmax[..., None], axis=-1)[..., 0]

    def backward(grad):
        routed = np.zeros((n, channels, out_h, out_w, 4), dtype=grad.dtype)
        np.put_along_axis(routed, argmax[..., None], grad[..., None], axis=-1)
        routed = routed.reshape(n, channels, out_h, out_w, 2, 2).transpose(0, 1, 2, 4, 3, 5)
        grad_x = np.zeros_like(x.data)
        grad_x[:, :, :2 * out_h, :2 * out_w] = routed.reshape(n, channels, 2 * out_h, 2 * out_w)
        return (grad_x,)

    return Tensor.from_op(np.ascontiguousarray(out), (x,), backward, 'maxpool2')


@dataclass
class RunningStats:
    """Per-channel running mean and variance of a batch-norm layer."""
    mean: np.ndarray
    var: np.ndarray
    momentum: float = BN_MOMENTUM

    @classmethod
    def for_channels(cls, channels, dtype=np.float64):
        return cls(mean=np.zeros(channels, dtype=dtype), var=np.ones(channels, dtype=dtype))


def batchnorm(x, gamma, beta, running_stats, training, eps=BN_EPSILON):
    """
    Per-channel batch normalization over [N, H, W].

    In training mode the batch statistics normalize the input and the
    running statistics are updated with an exponential moving average
    (unbiased batch variance). In eval mode the running statistics are used.
    """
    _require_rank(x, 4, 'batchnorm')
    n, channels, height, width = x.shape
    if gamma.shape != (channels,) or beta.shape != (channels,):
        raise ShapeError(f'batchnorm parameters must have shape ({channels},)')

    g = gamma.data[None, :, None, None]
    b = beta.data[None, :, None, None]

    if not training:
        inv_std = 1.0 / np.sqrt(running_stats.var + eps)
        x_hat = (x.data - running_stats.mean[None, :, None, None]) * inv_std[None, :, None, None]
        out = g * x_hat + b

        def backward_eval(grad):
            grad_x = grad * g * inv_std[None, :, None, None]
            grad_gamma = (grad * x_hat).sum(axis=(0, 2, 3))
            grad_beta = grad.sum(axis=(0, 2, 3))
            return grad_x, grad_gamma, grad_beta

        return Tensor.from_op(out.astype(x.dtype, copy=False), (x, gamma, beta), backward_eval, 'batchnorm')

    if n < 2:
        raise ConfigurationError('batchnorm in training mode needs a batch of at least 2 samples')

    count = n * height * width
    mean = x.data.mean(axis=(0, 2, 3))
    centered = x.data - mean[None, :, None, None]
    var = (centered ** 2).mean(axis=(0, 2, 3))
    inv_std = 1.0 / np.sqrt(var + eps)
    x_hat = centered * inv_std[None, :, None, None]
    out = g * x_hat + b

    momentum = running_stats.momentum
    unbiased = var * count / max(count - 1, 1)
    running_stats.mean[...] = (1 - momentum) * running_stats.mean + momentum * mean
    running_stats.var[...] = (1 - momentum) * running_stats.var + momentum * unbiased

    def backward(grad):
        grad_gamma = (grad * x_hat).sum(axis=(0, 2, 3))
        grad_beta = grad.sum(axis=(0, 2, 3))
        grad_x_hat = grad * g
        sum_grad = grad_x_hat.sum(axis=(0, 2, 3))[None, :, None, None]
        sum_grad_xhat = (grad_x_hat * x_hat).sum(axis=(0, 2, 3))[None, :, None, None]
        grad_x = (inv_std[None, :, None, None] / count) * (
            count * grad_x_hat - sum_grad - x_hat * sum_grad_xhat
        )
        return grad_x, grad_gamma, grad_beta

    return Tensor.from_op(out.astype(x.dtype, copy=False), (x, gamma, beta), backward, 'batchnorm')


def relu(x):
    mask = x.data > 0
    out = np.where(mask, x.data, 0).astype(x.dtype, copy=False)

    def backward(grad):
        return (grad * mask,)

    return Tensor.from_op(out, (x,), backward, 'relu')


def dropout(x, p, rng, training):
    """
    Inverted dropout: survivors are scaled by 1/(1-p) so eval mode is the
    identity. p=0 or eval mode returns the input tensor unchanged.
    """
    if not 0.0 <= p < 1.0:
        raise ConfigurationError(f'dropout probability must lie in [0, 1), got {p}')
    if not training or p == 0.0:
        return x
    keep = (rng.random(x.shape) >= p).astype(x.dtype) / (1.0 - p)
    out = x.data * keep

    def backward(grad):
        return (grad * keep,)

    return Tensor.from_op(out, (x,), backward, 'dropout')


def global_avg_pool(x):
    """[N, C, H, W] -> [N, C]"""
    _require_rank(x, 4, 'global_avg_pool')
    n, channels, height, width = x.shape
    out = x.data.mean(axis=(2, 3))

    def backward(grad):
        spread = grad[:, :, None, None] / (height * width)
        return (np.broadcast_to(spread, x.shape).astype(x.dtype),)

    return Tensor.from_op(out, (x,), backward, 'global_avg_pool')


def linear(x, weight, bias):
    """x [N, in] @ weight.T [in, out] + bias [out]"""
    _require_rank(x, 2, 'linear')
    if weight.shape[1] != x.shape[1]:
        raise ShapeError(
            f'linear input width {x.shape[1]} does not match weight input width {weight.shape[1]}'
        )
    out = x.data @ weight.data.T + bias.data

    def backward(grad):
        return grad @ weight.data, grad.T @ x.data, grad.sum(axis=0)

    return Tensor.from_op(out, (x, weight, bias), backward, 'linear')


def log_softmax(logits):
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def softmax(logits):
    return np.exp(log_softmax(np.asarray(logits, dtype=np.float64)))


def weighted_cross_entropy(logits, targets, weights):
    """
    Class-weighted cross-entropy, reduced as a weighted mean.

    loss = sum_i w[y_i] * -log softmax(logits_i)[y_i] / sum_i w[y_i]

    Args:
        logits: Tensor [N, K]
        targets: Integer class indices, length N
        weights: Per-class weights, length K, strictly positive
    """
    _require_rank(logits, 2, 'weighted_cross_entropy')
    if not np.all(np.isfinite(logits.data)):
        raise NumericError('weighted_cross_entropy received non-finite logits')
    targets = np.asarray(targets, dtype=np.int64)
    weights = np.asarray(weights, dtype=np.float64)
    n, classes = logits.shape
    if targets.shape != (n,):
        raise ShapeError(f'expected {n} targets, got shape {targets.shape}')
    if weights.shape != (classes,):
        raise ShapeError(f'expected {classes} class weights, got shape {weights.shape}')
    if np.any(targets < 0) or np.any(targets >= classes):
        raise UsageError(f'targets must lie in 0..{classes - 1}')
    if np.any(weights <= 0):
        raise ConfigurationError('class weights must be strictly positive')

    sample_weights = weights[targets]
    total_weight = sample_weights.sum()
    log_probs = log_softmax(logits.data.astype(np.float64))
    nll = -log_probs[np.arange(n), targets]
    loss = np.asarray((sample_weights * nll).sum() / total_weight)

    def backward(grad):
        probs = np.exp(log_probs)
        probs[np.arange(n), targets] -= 1.0
        grad_logits = probs * (sample_weights / total_weight)[:, None] * grad
        return (grad_logits.astype(logits.dtype),)

    check_finite(loss, 'weighted_cross_entropy')
    return Tensor.from_op(loss.astype(logits.dtype), (logits,), backward, 'weighted_cross_entropy')
