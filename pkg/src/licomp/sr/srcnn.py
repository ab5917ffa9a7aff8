"""Three-layer SRCNN (9-1-5 kernels, 64/32/1 filters) on unit-range luma."""

import numpy as np

from licomp.errors import DimensionError, NumericError
from licomp.tensor import Tensor, backward, conv2d, mse, no_grad, relu, replicate_pad
from licomp.tensor.nn import Module, he_uniform
from licomp.tensor.core import Param

KERNELS = (9, 1, 5)
FILTERS = (64, 32, 1)


class SrcnnModel(Module):
    def __init__(self, init="he", seed=0, jitter=1e-3):
        """``init``: ``"he"`` (random), ``"identity"`` (exact pass-through) or
        ``"identity+noise"`` (pass-through plus ``jitter``-scaled random taps so
        the unused filters still receive gradient)."""
        super().__init__()
        rng = np.random.default_rng(seed)
        cins = (1,) + FILTERS[:-1]
        self.weights = []
        self.biases = []
        for i, (k, cin, cout) in enumerate(zip(KERNELS, cins, FILTERS)):
            if init == "he":
                w = he_uniform(rng, (cout, cin, k, k), cin * k * k)
            elif init in ("identity", "identity+noise"):
                w = np.zeros((cout, cin, k, k), dtype=np.float32)
                w[0, 0, k // 2, k // 2] = 1.0
                if init == "identity+noise":
                    noise = rng.normal(0.0, jitter, size=w.shape).astype(np.float32)
                    noise[0, 0] = 0.0
                    w += noise
            else:
                raise ValueError(f"unknown SRCNN init {init!r}")
            self.weights.append(Param(w, name=f"w{i}"))
            self.biases.append(Param(np.zeros(cout, dtype=np.float32), name=f"b{i}"))

    def forward(self, x):
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            x = conv2d(replicate_pad(x, KERNELS[i] // 2), w, b)
            if i < len(KERNELS) - 1:
                x = relu(x)
        return x

    @classmethod
    def from_state(cls, state):
        model = cls(init="identity")
        model.load_state_dict(state)
        return model.eval()


def srcnn_forward(plane, model):
    """Enhance one unit-range (H, W) plane (already upsampled to target size)."""
    plane = np.asarray(plane)
    if plane.ndim == 3:
        if plane.shape[0] != 1:
            raise DimensionError(f"SRCNN is single-channel, got {plane.shape[0]} channels")
        plane = plane[0]
    if plane.ndim != 2:
        raise DimensionError(f"SRCNN expects an (H, W) plane, got shape {plane.shape}")
    with no_grad():
        out = model(Tensor(plane[None, None].astype(np.float32))).data[0, 0]
    return np.clip(out.astype(np.float64), 0.0, 1.0)


def srcnn_train_step(model, inputs, targets, optimizer):
    """MSE step on (N,1,H,W) unit-range batches; returns the loss value."""
    if inputs.shape != targets.shape:
        raise DimensionError(f"input/target batches differ: {inputs.shape} vs {targets.shape}")
    optimizer.zero_grad()
    loss = mse(model(Tensor(inputs, dtype=np.float32)), Tensor(targets, dtype=np.float32))
    value = loss.item()
    if not np.isfinite(value):
        raise NumericError(f"non-finite SRCNN loss {value}")
    backward(loss)
    optimizer.step()
    return value


def degrade_luma(img, scale=0.5):
    """(target, input) unit-range luma planes: input = bicubic_up(lanczos_down(img))."""
    from licomp.codec.image import luma
    from licomp.sr.resample import resample, resample_planes

    small = resample(img.to_u8(), scale, "lanczos3")
    up = resample_planes(small.to_float().planes, (img.width, img.height), "bicubic")
    target = luma(img.to_float())
    degraded = up[0] if small.colorspace == "Gray" else luma(
        type(img)(np.clip(up, 0.0, 1.0), small.colorspace))
    return target, degraded


def make_sr_pairs(images, patch, count, seed):
    """``count`` aligned (input, target) luma crops of side ``patch`` as (N,1,p,p) float32."""
    rng = np.random.default_rng(seed)
    planes = [degrade_luma(img) for img in images if min(img.width, img.height) >= patch]
    if not planes:
        raise DimensionError(f"no image is at least {patch}x{patch}")
    inputs = np.empty((count, 1, patch, patch), dtype=np.float32)
    targets = np.empty_like(inputs)
    for i in range(count):
        target, degraded = planes[rng.integers(len(planes))]
        oy = rng.integers(target.shape[0] - patch + 1)
        ox = rng.integers(target.shape[1] - patch + 1)
        inputs[i, 0] = degraded[oy:oy + patch, ox:ox + patch]
        targets[i, 0] = target[oy:oy + patch, ox:ox + patch]
    return inputs, targets
