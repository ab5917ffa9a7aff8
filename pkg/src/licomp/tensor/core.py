"""Reverse-mode autodiff tensor and elementwise operations.

Every op records a closure mapping the output gradient to gradients for its
parents.  Leaves created with ``requires_grad=True`` (normally :class:`Param`)
accumulate into ``.grad``; intermediate gradients are discarded once
:func:`backward` finishes and the graph is released.
"""

from contextlib import contextmanager

import numpy as np

from licomp.errors import DimensionError, GraphError

_grad_enabled = True


@contextmanager
def no_grad():
    """Disable graph recording inside the block (inference)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


def _as_float(data, dtype=None):
    arr = np.asarray(data)
    if dtype is not None:
        return arr.astype(dtype, copy=False)
    if arr.dtype not in (np.float32, np.float64):
        arr = arr.astype(np.float32)
    return arr


class Tensor:
    __array_priority__ = 100

    def __init__(self, data, requires_grad=False, name=None, dtype=None):
        self.data = _as_float(data, dtype)
        self.requires_grad = requires_grad
        self.name = name
        self.grad = None
        self._parents = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self):
        return self.data.size

    def item(self):
        return float(self.data)

    def numpy(self):
        return self.data

    def detach(self):
        return Tensor(self.data)

    def __repr__(self):
        tag = f", name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}{tag})"

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def sum(self, axis=None):
        return tsum(self, axis)

    def mean(self, axis=None):
        return mean(self, axis)

    def backward(self):
        backward(self)


class Param(Tensor):
    """Trainable leaf; gradient buffer always matches the value's shape."""

    def __init__(self, data, name=None, dtype=None):
        super().__init__(data, requires_grad=True, name=name, dtype=dtype)
        self.grad = np.zeros_like(self.data)

    @property
    def value(self):
        return self.data

    def zero_grad(self):
        self.grad = np.zeros_like(self.data)

    def astype(self, dtype):
        self.data = self.data.astype(dtype)
        self.grad = np.zeros_like(self.data)
        return self


def tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _pair(a, b):
    """Wrap constants so they take the dtype of the tensor operand."""
    if isinstance(a, Tensor) and not isinstance(b, Tensor):
        return a, Tensor(b, dtype=a.dtype)
    if isinstance(b, Tensor) and not isinstance(a, Tensor):
        return Tensor(a, dtype=b.dtype), b
    return tensor(a), tensor(b)


def make_result(data, parents, backward_fn):
    """Wrap ``data`` as an op output, linking it into the tape when needed."""
    out = Tensor(data)
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward_fn
    return out


def backward(loss):
    """Populate ``.grad`` on every reachable leaf with d(loss)/d(leaf)."""
    if not isinstance(loss, Tensor) or not loss.requires_grad:
        raise GraphError("backward() called on a tensor with no recorded graph")
    if loss.data.size != 1:
        raise GraphError(f"backward() needs a scalar loss, got shape {loss.shape}")

    order = []
    seen = set()
    stack = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))

    grads = {id(loss): np.ones_like(loss.data)}
    for node in reversed(order):
        g = grads.pop(id(node), None)
        if node._backward is None:
            if g is not None:
                if node.grad is None:
                    node.grad = np.zeros_like(node.data)
                node.grad = node.grad + g.astype(node.data.dtype, copy=False)
            continue
        if g is None:
            continue
        parent_grads = node._backward(g)
        for p, pg in zip(node._parents, parent_grads):
            if pg is None or not p.requires_grad:
                continue
            key = id(p)
            if key in grads:
                grads[key] = grads[key] + pg
            else:
                grads[key] = pg

    for node in order:
        if node._backward is not None:
            node._parents = ()
            node._backward = None
            node.requires_grad = False


def _unbroadcast(grad, shape):
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def add(a, b):
    a, b = _pair(a, b)

    def bw(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return make_result(a.data + b.data, (a, b), bw)


def sub(a, b):
    a, b = _pair(a, b)

    def bw(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return make_result(a.data - b.data, (a, b), bw)


def mul(a, b):
    a, b = _pair(a, b)

    def bw(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return make_result(a.data * b.data, (a, b), bw)


def square(x):
    def bw(g):
        return (2.0 * g * x.data,)

    return make_result(x.data * x.data, (x,), bw)


def log(x):
    def bw(g):
        return (g / x.data,)

    return make_result(np.log(x.data), (x,), bw)


def clip(x, lo, hi):
    """Clamp values; gradient flows only where the input was inside the range."""
    inside = (x.data >= lo) & (x.data <= hi)

    def bw(g):
        return (g * inside,)

    return make_result(np.clip(x.data, lo, hi), (x,), bw)


def tsum(x, axis=None):
    def bw(g):
        if axis is None:
            return (np.broadcast_to(g, x.shape).copy(),)
        return (np.broadcast_to(np.expand_dims(g, axis), x.shape).copy(),)

    return make_result(np.asarray(x.data.sum(axis=axis)), (x,), bw)


def mean(x, axis=None):
    n = x.data.size if axis is None else np.prod([x.shape[a] for a in np.atleast_1d(axis)])
    return mul(tsum(x, axis), 1.0 / float(n))


def reshape(x, shape):
    old = x.shape

    def bw(g):
        return (g.reshape(old),)

    return make_result(x.data.reshape(shape), (x,), bw)


def matmul(a, b):
    """2-D matrix product."""
    if a.ndim != 2 or b.ndim != 2:
        raise DimensionError(f"matmul expects 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise DimensionError(
            f"matmul inner axis mismatch: {a.shape[1]} (axis 1 of lhs) vs {b.shape[0]} (axis 0 of rhs)"
        )

    def bw(g):
        return g @ b.data.T, a.data.T @ g

    return make_result(a.data @ b.data, (a, b), bw)


def mse(a, b):
    """Mean squared difference of two same-shaped tensors."""
    if a.shape != b.shape:
        raise DimensionError(f"mse operands differ in shape: {a.shape} vs {b.shape}")
    return mean(square(sub(a, b)))


def replicate_pad(x, pad):
    """Edge-replicate the two spatial axes of an NCHW tensor by ``pad`` pixels."""
    if pad == 0:
        return x
    h, w = x.shape[2], x.shape[3]

    def bw(g):
        gi = g[:, :, pad:pad + h, pad:pad + w].copy()
        gi[:, :, 0, :] += g[:, :, :pad, pad:pad + w].sum(axis=2)
        gi[:, :, -1, :] += g[:, :, pad + h:, pad:pad + w].sum(axis=2)
        col_l = g[:, :, :, :pad].sum(axis=3)
        col_r = g[:, :, :, pad + w:].sum(axis=3)
        gi[:, :, :, 0] += col_l[:, :, pad:pad + h]
        gi[:, :, :, -1] += col_r[:, :, pad:pad + h]
        gi[:, :, 0, 0] += col_l[:, :, :pad].sum(axis=2)
        gi[:, :, -1, 0] += col_l[:, :, pad + h:].sum(axis=2)
        gi[:, :, 0, -1] += col_r[:, :, :pad].sum(axis=2)
        gi[:, :, -1, -1] += col_r[:, :, pad + h:].sum(axis=2)
        return (gi,)

    data = np.pad(x.data, ((0, 0), (0, 0), (pad, pad), (pad, pad)), mode="edge")
    return make_result(data, (x,), bw)
