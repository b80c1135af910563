"""Minimal reverse-mode automatic differentiation over numpy arrays.

A Tensor wraps an ndarray and remembers how it was produced; backward()
walks the recorded graph and accumulates gradients into the leaves.  Only
the operations the models in this package need are implemented: 2-D
matmul, broadcasting arithmetic, shape ops, a few pointwise
nonlinearities and axis reductions.  Recurrent scans build graphs
thousands of nodes deep, so traversal is iterative, never recursive.
"""

from __future__ import annotations

from contextlib import contextmanager

import numpy as np

_grad_enabled = True


@contextmanager
def no_grad():
    """Disable graph recording inside the block (used for target-network
    forwards, i.e. the stop-gradient branch, and for evaluation)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


def grad_enabled():
    return _grad_enabled


def _unbroadcast(g, shape):
    """Sum gradient g down to `shape` (inverse of numpy broadcasting)."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad=False):
        self.data = data if isinstance(data, np.ndarray) else np.asarray(data)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = ()
        self._backward = None

    # -- construction of interior nodes ---------------------------------

    @staticmethod
    def _node(data, parents, backward):
        out = Tensor(data)
        if _grad_enabled and any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = parents
            out._backward = backward
        return out

    # -- basic introspection ---------------------------------------------

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    def detach(self):
        return Tensor(self.data)

    def item(self):
        return float(self.data)

    # -- arithmetic -------------------------------------------------------

    def __add__(self, other):
        if isinstance(other, Tensor):
            out_data = self.data + other.data

            def backward(g):
                return (_unbroadcast(g, self.data.shape),
                        _unbroadcast(g, other.data.shape))

            return Tensor._node(out_data, (self, other), backward)
        return Tensor._node(self.data + other, (self,), lambda g: (g,))

    __radd__ = __add__

    def __neg__(self):
        return Tensor._node(-self.data, (self,), lambda g: (-g,))

    def __sub__(self, other):
        if isinstance(other, Tensor):
            out_data = self.data - other.data

            def backward(g):
                return (_unbroadcast(g, self.data.shape),
                        _unbroadcast(-g, other.data.shape))

            return Tensor._node(out_data, (self, other), backward)
        return Tensor._node(self.data - other, (self,), lambda g: (g,))

    def __rsub__(self, other):
        # other is a scalar / ndarray constant
        return Tensor._node(other - self.data, (self,), lambda g: (-g,))

    def __mul__(self, other):
        if isinstance(other, Tensor):
            out_data = self.data * other.data
            a, b = self.data, other.data

            def backward(g):
                return (_unbroadcast(g * b, a.shape),
                        _unbroadcast(g * a, b.shape))

            return Tensor._node(out_data, (self, other), backward)
        return Tensor._node(self.data * other, (self,), lambda g: (g * other,))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            a, b = self.data, other.data
            out_data = a / b

            def backward(g):
                return (_unbroadcast(g / b, a.shape),
                        _unbroadcast(-g * a / (b * b), b.shape))

            return Tensor._node(out_data, (self, other), backward)
        return Tensor._node(self.data / other, (self,), lambda g: (g / other,))

    def __rtruediv__(self, other):
        a = self.data
        return Tensor._node(other / a, (self,), lambda g: (-g * other / (a * a),))

    def __pow__(self, exponent):
        a = self.data
        out_data = a ** exponent
        return Tensor._node(
            out_data, (self,), lambda g: (g * exponent * a ** (exponent - 1),))

    def __matmul__(self, other):
        assert isinstance(other, Tensor)
        a, b = self.data, other.data
        assert a.ndim == 2 and b.ndim == 2, "matmul supports 2-D operands only"
        out_data = a @ b

        def backward(g):
            return (g @ b.T, a.T @ g)

        return Tensor._node(out_data, (self, other), backward)

    # -- shape ops ----------------------------------------------------------

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        old = self.data.shape
        return Tensor._node(
            self.data.reshape(shape), (self,), lambda g: (g.reshape(old),))

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        inv = tuple(np.argsort(axes))
        return Tensor._node(
            self.data.transpose(axes), (self,), lambda g: (g.transpose(inv),))

    def __getitem__(self, idx):
        out_data = self.data[idx]
        shape = self.data.shape

        def backward(g):
            full = np.zeros(shape, dtype=g.dtype)
            full[idx] = g
            return (full,)

        return Tensor._node(out_data, (self,), backward)

    def pad_axis(self, axis, before, after):
        """Zero-pad along one axis."""
        width = [(0, 0)] * self.data.ndim
        width[axis] = (before, after)
        n = self.data.shape[axis]
        idx = [slice(None)] * self.data.ndim
        idx[axis] = slice(before, before + n)
        idx = tuple(idx)
        return Tensor._node(
            np.pad(self.data, width), (self,), lambda g: (g[idx],))

    # -- reductions -----------------------------------------------------------

    def sum(self, axis=None, keepdims=False):
        out_data = self.data.sum(axis=axis, keepdims=keepdims)
        shape = self.data.shape

        def backward(g):
            if axis is None:
                return (np.broadcast_to(g, shape).copy(),)
            ax = axis if isinstance(axis, tuple) else (axis,)
            if not keepdims:
                g = np.expand_dims(g, ax)
            return (np.broadcast_to(g, shape).copy(),)

        return Tensor._node(out_data, (self,), backward)

    def mean(self, axis=None, keepdims=False):
        if axis is None:
            count = self.data.size
        else:
            ax = axis if isinstance(axis, tuple) else (axis,)
            count = 1
            for a in ax:
                count *= self.data.shape[a]
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / count)

    # -- pointwise nonlinearities ------------------------------------------

    def relu(self):
        mask = self.data > 0
        return Tensor._node(
            np.where(mask, self.data, 0.0), (self,), lambda g: (g * mask,))

    def sigmoid(self):
        # tanh form: stable at both tails, single vectorized kernel
        out_data = 0.5 * (1.0 + np.tanh(0.5 * self.data))
        return Tensor._node(
            out_data, (self,), lambda g: (g * out_data * (1.0 - out_data),))

    def tanh(self):
        out_data = np.tanh(self.data)
        return Tensor._node(
            out_data, (self,), lambda g: (g * (1.0 - out_data * out_data),))

    def exp(self):
        out_data = np.exp(self.data)
        return Tensor._node(out_data, (self,), lambda g: (g * out_data,))

    def log(self):
        a = self.data
        return Tensor._node(np.log(a), (self,), lambda g: (g / a,))

    def sqrt(self):
        out_data = np.sqrt(self.data)
        return Tensor._node(
            out_data, (self,), lambda g: (g * 0.5 / out_data,))

    # -- backward pass ---------------------------------------------------------

    def backward(self):
        assert self.data.size == 1, "backward() expects a scalar loss"
        topo = []
        visited = set()
        stack = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad and id(p) not in visited:
                    stack.append((p, False))

        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is None:
                continue
            grads = node._backward(node.grad)
            for parent, g in zip(node._parents, grads):
                if g is None or not parent.requires_grad:
                    continue
                if parent.grad is None:
                    parent.grad = g
                else:
                    parent.grad = parent.grad + g
            # interior grads are no longer needed once propagated
            node.grad = None
            node._parents = ()
            node._backward = None


def concat(tensors, axis):
    datas = [t.data for t in tensors]
    out_data = np.concatenate(datas, axis=axis)
    sizes = [d.shape[axis] for d in datas]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        out = []
        idx = [slice(None)] * g.ndim
        for i in range(len(sizes)):
            idx[axis] = slice(offsets[i], offsets[i + 1])
            out.append(g[tuple(idx)])
        return tuple(out)

    return Tensor._node(out_data, tuple(tensors), backward)


def stack(tensors, axis=0):
    out_data = np.stack([t.data for t in tensors], axis=axis)

    def backward(g):
        return tuple(np.take(g, i, axis=axis) for i in range(len(tensors)))

    return Tensor._node(out_data, tuple(tensors), backward)


def as_tensor(x, dtype=None):
    """Wrap an array as a constant (no-grad) Tensor."""
    if isinstance(x, Tensor):
        return x
    arr = np.asarray(x, dtype=dtype)
    return Tensor(arr)


def parameter(array, rng=None):
    """Mark an array as trainable."""
    return Tensor(np.asarray(array), requires_grad=True)
