"""
Dense tensor with reverse-mode differentiation.

A Tensor wraps a numpy array. Operations in apps.tensor.ops build new
tensors that remember their parents and a backward function mapping the
output gradient to one gradient per parent. Tensor.backward() walks that
graph in reverse topological order.

Tensors are treated as immutable once an operation has produced them; only
`grad` is written during the backward pass.
"""

import numpy as np

from apps.core.exceptions import NumericError

FLOAT_TYPES = (np.float32, np.float64)


def check_finite(array, where):
    """Raise NumericError if the array holds NaN or Inf."""
    if not np.all(np.isfinite(array)):
        raise NumericError(f'Non-finite values produced by {where}')


class Tensor:
    """
    N-dimensional array node in the autodiff graph.

    Attributes:
        data: numpy array (float64 for gradient checks, float32 for training)
        requires_grad: Whether gradients flow into this tensor
        grad: Accumulated gradient, same shape as data (None until backward)
        name: Optional parameter name, used by checkpoints
    """

    def __init__(self, data, requires_grad=False, name='', dtype=None):
        array = np.asarray(data)
        if dtype is not None:
            array = array.astype(dtype, copy=False)
        elif array.dtype.type not in FLOAT_TYPES:
            array = array.astype(np.float64)
        self.data = array
        self.requires_grad = requires_grad
        self.grad = None
        self.name = name
        self._parents = ()
        self._backward = None
        self._op = ''

    @classmethod
    def from_op(cls, data, parents, backward, op):
        """Build the output of an operation and link it into the graph."""
        check_finite(data, op)
        requires_grad = any(parent.requires_grad for parent in parents)
        out = cls(data, requires_grad=requires_grad)
        if requires_grad:
            out._parents = tuple(parents)
            out._backward = backward
        out._op = op
        return out

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self):
        return self.data.size

    def numpy(self):
        return self.data

    def item(self):
        return float(self.data.reshape(-1)[0])

    def zero_grad(self):
        self.grad = None

    def detach(self):
        return Tensor(self.data, requires_grad=False, name=self.name)

    def __repr__(self):
        label = f' {self.name}' if self.name else ''
        return f'<Tensor{label} shape={tuple(self.shape)} dtype={self.dtype} op={self._op or "leaf"}>'

    def _topological_order(self):
        order = []
        visited = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if parent.requires_grad and id(parent) not in visited:
                    stack.append((parent, False))
        return order

    def backward(self, grad=None):
        """
        Accumulate gradients of this tensor into every upstream leaf.

        Args:
            grad: Seed gradient; defaults to ones (use for scalar losses)
        """
        if not self.requires_grad:
            raise NumericError('backward() called on a tensor that does not require grad')

        seed = np.ones_like(self.data) if grad is None else np.asarray(grad, dtype=self.data.dtype)
        self.grad = seed if self.grad is None else self.grad + seed

        for node in reversed(self._topological_order()):
            if node._backward is None or node.grad is None:
                continue
            parent_grads = node._backward(node.grad)
            for parent, parent_grad in zip(node._parents, parent_grads):
                if parent_grad is None or not parent.requires_grad:
                    continue
                check_finite(parent_grad, f'backward of {node._op}')
                if parent.grad is None:
                    parent.grad = parent_grad.astype(parent.data.dtype, copy=True)
                else:
                    parent.grad = parent.grad + parent_grad
