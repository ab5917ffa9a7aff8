"""Activations and normalization."""

import numpy as np

from licomp.errors import DimensionError
from licomp.tensor.core import make_result, tensor


def _channel_view(a, ndim):
    return a.reshape((1, -1) + (1,) * (ndim - 2))


def prelu(x, slope):
    """x for x >= 0, slope[c] * x otherwise; ``slope`` is one value per channel (axis 1)."""
    x, slope = tensor(x), tensor(slope)
    if slope.shape != (x.shape[1],):
        raise DimensionError(f"prelu slope must have shape ({x.shape[1]},), got {slope.shape}")
    a = _channel_view(slope.data, x.ndim)
    pos = x.data >= 0
    out = np.where(pos, x.data, a * x.data)

    def bw(g):
        gx = g * np.where(pos, 1.0, a).astype(g.dtype)
        red = tuple(i for i in range(x.ndim) if i != 1)
        ga = (g * np.where(pos, 0.0, x.data)).sum(axis=red)
        return gx, ga

    return make_result(out, (x, slope), bw)


def leaky_relu(x, slope=0.2):
    pos = x.data >= 0
    scale = np.where(pos, 1.0, slope).astype(x.dtype)

    def bw(g):
        return (g * scale,)

    return make_result(x.data * scale, (x,), bw)


def relu(x):
    return leaky_relu(x, 0.0)


def tanh(x):
    y = np.tanh(x.data)

    def bw(g):
        return (g * (1.0 - y * y),)

    return make_result(y, (x,), bw)


def sigmoid(x):
    y = 0.5 * (1.0 + np.tanh(0.5 * x.data))

    def bw(g):
        return (g * y * (1.0 - y),)

    return make_result(y, (x,), bw)


def activation(x, kind, slope=None):
    """Dispatch by name: ``prelu`` (needs a slope Param), ``leaky_relu``, ``relu``, ``tanh``, ``sigmoid``."""
    if kind == "prelu":
        return prelu(x, slope)
    if kind == "leaky_relu":
        return leaky_relu(x, 0.2 if slope is None else slope)
    if kind == "relu":
        return relu(x)
    if kind == "tanh":
        return tanh(x)
    if kind == "sigmoid":
        return sigmoid(x)
    raise ValueError(f"unknown activation {kind!r}")


def batch_norm(x, gamma, beta, running_mean, running_var, training, momentum=0.9, eps=1e-5):
    """Per-channel normalization over every axis but 1.

    In training mode batch statistics are used and the running buffers are
    updated in place as ``running = momentum * running + (1 - momentum) * batch``
    (biased variance, so inference reproduces training on a steady batch).
    """
    x = tensor(x)
    axes = tuple(i for i in range(x.ndim) if i != 1)
    m = int(np.prod([x.shape[a] for a in axes])) if x.size else 0
    if m == 0:
        raise DimensionError("batch_norm on an empty batch")
    shape = (1, -1) + (1,) * (x.ndim - 2)
    if training:
        if m < 2:
            raise DimensionError("batch_norm training mode needs at least 2 values per channel")
        mu = x.data.mean(axis=axes)
        var = x.data.var(axis=axes)
        running_mean *= momentum
        running_mean += (1.0 - momentum) * mu
        running_var *= momentum
        running_var += (1.0 - momentum) * var
    else:
        mu, var = running_mean, running_var
    inv_std = (1.0 / np.sqrt(var + eps)).astype(x.dtype)
    xhat = (x.data - mu.reshape(shape).astype(x.dtype)) * inv_std.reshape(shape)
    out = gamma.data.reshape(shape) * xhat + beta.data.reshape(shape)

    def bw(g):
        gg = (g * xhat).sum(axis=axes)
        gb = g.sum(axis=axes)
        dxhat = g * gamma.data.reshape(shape)
        if training:
            gx = (inv_std.reshape(shape) / m) * (
                m * dxhat
                - dxhat.sum(axis=axes).reshape(shape)
                - xhat * (dxhat * xhat).sum(axis=axes).reshape(shape)
            )
        else:
            gx = dxhat * inv_std.reshape(shape)
        return gx, gg, gb

    return make_result(out, (x, gamma, beta), bw)
