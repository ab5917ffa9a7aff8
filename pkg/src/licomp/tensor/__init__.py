"""Minimal reverse-mode autodiff engine (numpy backed)."""

from licomp.tensor.checkpoint import load_checkpoint, save_checkpoint
from licomp.tensor.conv import conv2d, conv2d_transpose
from licomp.tensor.core import (
    Param,
    Tensor,
    add,
    backward,
    clip,
    log,
    matmul,
    mean,
    mse,
    mul,
    no_grad,
    replicate_pad,
    reshape,
    square,
    sub,
    tsum,
)
from licomp.tensor.functional import activation, batch_norm, leaky_relu, prelu, relu, sigmoid, tanh
from licomp.tensor.optim import Adam, AdamState, adam_step

__all__ = [
    "Adam", "AdamState", "Param", "Tensor", "activation", "adam_step", "add", "backward",
    "batch_norm", "clip", "conv2d", "conv2d_transpose", "leaky_relu", "load_checkpoint", "log",
    "matmul", "mean", "mse", "mul", "no_grad", "prelu", "relu", "replicate_pad", "reshape",
    "save_checkpoint", "sigmoid", "square", "sub", "tanh", "tsum",
]
