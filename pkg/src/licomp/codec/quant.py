"""Per-channel uniform scalar quantizer."""

from dataclasses import dataclass

import numpy as np

from licomp.codec.image import FeatureBlock
from licomp.errors import BitstreamError

STEP_FLOOR = 1e-9


@dataclass
class QuantParams:
    bits: int
    mins: np.ndarray  # float32, one per channel
    steps: np.ndarray  # float32, one per channel

    @property
    def levels(self):
        return 1 << self.bits


def _check_bits(bits):
    if not 2 <= bits <= 16:
        raise ValueError(f"bits must be in [2, 16], got {bits}")


def quantize(fb, bits, min_step=STEP_FLOOR):
    """Map each channel onto ``2**bits`` levels spanning its [min, max].

    ``min_step`` floors the step size; the default only guards constant
    channels.  Min and step are rounded to float32 before coding so the
    decoder sees exactly the same reconstruction grid.
    """
    _check_bits(bits)
    v = fb.values.reshape(fb.channels, -1).astype(np.float64)
    if not np.all(np.isfinite(v)):
        raise ValueError("cannot quantize non-finite values")
    top = (1 << bits) - 1
    lo = v.min(axis=1) if v.shape[1] else np.zeros(fb.channels)
    hi = v.max(axis=1) if v.shape[1] else np.zeros(fb.channels)
    # round min down and step up to float32 so [min, max] stays covered exactly
    mins = lo.astype(np.float32)
    mins = np.where(mins > lo, np.nextafter(mins, np.float32(-np.inf)), mins)
    span = hi - mins.astype(np.float64)
    steps = np.maximum(span / top, max(min_step, STEP_FLOOR)).astype(np.float32)
    steps = np.where(steps.astype(np.float64) * top < span, np.nextafter(steps, np.float32(np.inf)), steps)
    m64, s64 = mins.astype(np.float64)[:, None], steps.astype(np.float64)[:, None]
    codes = np.clip(np.rint((v - m64) / s64), 0, top).astype(np.int64)
    return codes.reshape(fb.values.shape), QuantParams(bits, mins, steps)


def dequantize(codes, qp):
    codes = np.asarray(codes)
    if codes.size and (codes.min() < 0 or codes.max() > (1 << qp.bits) - 1):
        raise BitstreamError(f"quantization code outside [0, {(1 << qp.bits) - 1}]")
    c = codes.shape[0]
    flat = codes.reshape(c, -1).astype(np.float64)
    v = qp.mins.astype(np.float64)[:, None] + flat * qp.steps.astype(np.float64)[:, None]
    return FeatureBlock(v.reshape(codes.shape))
