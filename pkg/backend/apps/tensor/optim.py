"""
SGD with classical (heavy-ball) momentum.

    v <- momentum * v + g
    p <- p - lr * v

No Nesterov correction and no dampening.
"""

from dataclasses import dataclass

import numpy as np

from apps.core.exceptions import ConfigurationError, ShapeError
from apps.tensor.tensor import check_finite


@dataclass
class OptimizerState:
    """Velocity buffers, one per parameter tensor, plus hyperparameters."""
    velocity: list
    lr: float
    momentum: float

    def __post_init__(self):
        if self.lr <= 0:
            raise ConfigurationError(f'learning rate must be positive, got {self.lr}')
        if not 0.0 <= self.momentum < 1.0:
            raise ConfigurationError(f'momentum must lie in [0, 1), got {self.momentum}')

    @classmethod
    def for_parameters(cls, params, lr, momentum):
        return cls(velocity=[np.zeros_like(p.data) for p in params], lr=lr, momentum=momentum)


def sgd_momentum_step(params, grads, state):
    """
    Apply one momentum update in place.

    Args:
        params: Parameter tensors
        grads: Gradient arrays aligned with params (None counts as zero)
        state: OptimizerState, velocity updated in place

    Returns:
        The same list of parameter tensors
    """
    if len(params) != len(grads) or len(params) != len(state.velocity):
        raise ShapeError(
            f'{len(params)} parameters, {len(grads)} gradients and '
            f'{len(state.velocity)} velocity buffers do not line up'
        )
    for index, (param, grad, velocity) in enumerate(zip(params, grads, state.velocity)):
        if grad is None:
            grad = np.zeros_like(param.data)
        grad = np.asarray(grad)
        if grad.shape != param.shape or velocity.shape != param.shape:
            raise ShapeError(
                f'parameter {param.name or index} has shape {param.shape}, '
                f'gradient {grad.shape}, velocity {velocity.shape}'
            )
        check_finite(grad, f'gradient of {param.name or index}')
        velocity *= state.momentum
        velocity += grad
        param.data -= (state.lr * velocity).astype(param.dtype, copy=False)
    return params
