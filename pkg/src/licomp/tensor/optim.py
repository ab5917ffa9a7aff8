from dataclasses import dataclass, field

import numpy as np

from licomp.errors import NumericError


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_param(cls, param, **hyper):
        return cls(np.zeros_like(param.data), np.zeros_like(param.data), **hyper)


def adam_step(param, state):
    """Apply one bias-corrected Adam update in place and clear ``param.grad``."""
    g = param.grad
    if g.shape != param.shape or state.m.shape != param.shape:
        raise ValueError(f"{param.name}: Adam state shape does not match parameter {param.shape}")
    if not np.all(np.isfinite(g)):
        raise NumericError(f"non-finite gradient for parameter {param.name or '<unnamed>'}")
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    state.m = b1 * state.m + (1.0 - b1) * g
    state.v = b2 * state.v + (1.0 - b2) * (g * g)
    m_hat = state.m / (1.0 - b1 ** state.t)
    v_hat = state.v / (1.0 - b2 ** state.t)
    param.data = (param.data - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)).astype(param.dtype)
    param.zero_grad()
    return param, state


@dataclass
class Adam:
    """Adam over a fixed list of params (one :class:`AdamState` each)."""

    params: list
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    states: list = field(init=False)

    def __post_init__(self):
        self.params = list(self.params)
        self.states = [
            AdamState.for_param(p, lr=self.lr, beta1=self.beta1, beta2=self.beta2, eps=self.eps)
            for p in self.params
        ]

    def zero_grad(self):
        for p in self.params:
            p.zero_grad()

    def step(self):
        for p, s in zip(self.params, self.states):
            adam_step(p, s)
