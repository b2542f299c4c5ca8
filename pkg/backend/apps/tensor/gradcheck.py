"""Central finite-difference gradient checks (double precision)."""

import numpy as np

DEFAULT_STEP = 1e-5
TOLERANCE = 1e-4


def numerical_gradient(fn, tensor, eps=DEFAULT_STEP, indices=None):
    """
    Central-difference gradient of the scalar fn() with respect to tensor.data.

    Each element is perturbed by +-eps in place and restored afterwards.
    With indices (flat positions) only those entries are estimated; the
    rest of the returned array stays zero.
    """
    data = tensor.data
    grad = np.zeros(data.shape, dtype=np.float64)
    flat = data.reshape(-1)
    grad_flat = grad.reshape(-1)
    positions = range(flat.size) if indices is None else indices
    for index in positions:
        original = flat[index]
        flat[index] = original + eps
        plus = float(np.sum(fn()))
        flat[index] = original - eps
        minus = float(np.sum(fn()))
        flat[index] = original
        grad_flat[index] = (plus - minus) / (2 * eps)
    return grad


def max_relative_error(analytic, numeric):
    """max|a - n| / max(max|a|, max|n|, 1e-12)"""
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    scale = max(np.abs(analytic).max(initial=0.0), np.abs(numeric).max(initial=0.0), 1e-12)
    return float(np.abs(analytic - numeric).max(initial=0.0) / scale)


def check_gradients(fn, tensors, eps=DEFAULT_STEP, sample=None, rng=None):
    """
    Compare analytic and numeric gradients of fn for every tensor in tensors.

    fn must build a fresh graph on each call and return a scalar Tensor.

    Args:
        sample: If set, check at most this many random entries per tensor
        rng: Generator used to pick the sampled entries

    Returns:
        dict: tensor name (or position) -> max relative error
    """
    for tensor in tensors:
        tensor.zero_grad()
    fn().backward()
    rng = rng or np.random.default_rng(0)

    errors = {}
    for i, tensor in enumerate(tensors):
        analytic = tensor.grad.reshape(-1).astype(np.float64)
        if sample is None or sample >= tensor.size:
            indices = np.arange(tensor.size)
        else:
            indices = np.sort(rng.choice(tensor.size, size=sample, replace=False))
        numeric = numerical_gradient(lambda: fn().data, tensor, eps, indices).reshape(-1)
        errors[tensor.name or str(i)] = max_relative_error(analytic[indices], numeric[indices])
    return errors
