"""Layer containers with named parameters, used by all three codec networks."""

import numpy as np

from licomp.tensor import functional as F
from licomp.tensor.conv import conv2d, conv2d_transpose
from licomp.tensor.core import Param, add, matmul


def he_uniform(rng, shape, fan_in, dtype=np.float32):
    bound = np.sqrt(6.0 / max(fan_in, 1))
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


class Module:
    """Minimal container: attributes that are Params, Modules or lists of Modules are walked in order."""

    def __init__(self):
        self.training = True
        self._buffers = {}

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def _children(self):
        for key, val in vars(self).items():
            if key.startswith("_"):
                continue
            if isinstance(val, (Param, Module)):
                yield key, val
            elif isinstance(val, (list, tuple)):
                for i, item in enumerate(val):
                    if isinstance(item, (Param, Module)):
                        yield f"{key}.{i}", item

    def named_params(self, prefix=""):
        for key, val in self._children():
            name = f"{prefix}{key}"
            if isinstance(val, Param):
                yield name, val
            else:
                yield from val.named_params(name + ".")

    def params(self):
        return [p for _, p in self.named_params()]

    def named_buffers(self, prefix=""):
        for key, arr in self._buffers.items():
            yield f"{prefix}{key}", arr
        for key, val in self._children():
            if isinstance(val, Module):
                yield from val.named_buffers(f"{prefix}{key}.")

    def modules(self):
        yield self
        for _, val in self._children():
            if isinstance(val, Module):
                yield from val.modules()

    def state_dict(self):
        state = {name: p.data for name, p in self.named_params()}
        state.update(self.named_buffers())
        return state

    def load_state_dict(self, state):
        for name, p in self.named_params():
            arr = np.asarray(state[name])
            if arr.shape != p.shape:
                raise ValueError(f"{name}: checkpoint shape {arr.shape} != model shape {p.shape}")
            p.data = arr.astype(p.dtype).copy()
            p.zero_grad()
        for name, buf in self.named_buffers():
            buf[...] = np.asarray(state[name], dtype=buf.dtype)

    def train(self, mode=True):
        for mod in self.modules():
            mod.training = mode
        return self

    def eval(self):
        return self.train(False)

    def zero_grad(self):
        for p in self.params():
            p.zero_grad()

    def astype(self, dtype):
        """Cast params and buffers (e.g. to float64 for gradient checks)."""
        for p in self.params():
            p.astype(dtype)
        for mod in self.modules():
            for key, arr in mod._buffers.items():
                mod._buffers[key] = arr.astype(dtype)
        return self


class Conv2d(Module):
    def __init__(self, cin, cout, kernel, stride=1, pad=0, rng=None):
        super().__init__()
        rng = rng if rng is not None else np.random.default_rng(0)
        self.stride, self.pad = stride, pad
        self.weight = Param(he_uniform(rng, (cout, cin, kernel, kernel), cin * kernel * kernel))
        self.bias = Param(np.zeros(cout, dtype=np.float32))

    def forward(self, x):
        return conv2d(x, self.weight, self.bias, self.stride, self.pad)


class ConvTranspose2d(Module):
    def __init__(self, cin, cout, kernel, stride=1, pad=0, rng=None):
        super().__init__()
        rng = rng if rng is not None else np.random.default_rng(0)
        self.stride, self.pad = stride, pad
        fan_in = cin * kernel * kernel // (stride * stride)
        self.weight = Param(he_uniform(rng, (cin, cout, kernel, kernel), fan_in))
        self.bias = Param(np.zeros(cout, dtype=np.float32))

    def forward(self, x):
        return conv2d_transpose(x, self.weight, self.bias, self.stride, self.pad)


class Linear(Module):
    def __init__(self, fin, fout, rng=None):
        super().__init__()
        rng = rng if rng is not None else np.random.default_rng(0)
        self.weight = Param(he_uniform(rng, (fin, fout), fin))
        self.bias = Param(np.zeros(fout, dtype=np.float32))

    def forward(self, x):
        return add(matmul(x, self.weight), self.bias)


class PReLU(Module):
    def __init__(self, channels, init=0.25):
        super().__init__()
        self.slope = Param(np.full(channels, init, dtype=np.float32))

    def forward(self, x):
        return F.prelu(x, self.slope)


class BatchNorm(Module):
    def __init__(self, channels, momentum=0.9, eps=1e-5):
        super().__init__()
        self.momentum, self.eps = momentum, eps
        self.gamma = Param(np.ones(channels, dtype=np.float32))
        self.beta = Param(np.zeros(channels, dtype=np.float32))
        self._buffers["running_mean"] = np.zeros(channels, dtype=np.float32)
        self._buffers["running_var"] = np.ones(channels, dtype=np.float32)

    def forward(self, x):
        return F.batch_norm(
            x, self.gamma, self.beta,
            self._buffers["running_mean"], self._buffers["running_var"],
            self.training, self.momentum, self.eps,
        )
