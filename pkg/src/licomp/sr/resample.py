"""Separable resampling (lanczos3, bicubic, box) with edge clamping.

Downscaling stretches the kernel by the scale factor (antialiasing); sample
centres sit at half-integer positions.
"""

from functools import lru_cache

import numpy as np

from licomp.codec.image import Image, to_u8


def _lanczos3(x):
    x = np.abs(x)
    return np.where(x < 3.0, np.sinc(x) * np.sinc(x / 3.0), 0.0)


def _bicubic(x, a=-0.5):
    x = np.abs(x)
    near = ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0
    far = ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a
    return np.where(x <= 1.0, near, np.where(x < 2.0, far, 0.0))


def _box(x):
    return np.where((x >= -0.5) & (x < 0.5), 1.0, 0.0)


KERNELS = {"lanczos3": (_lanczos3, 3.0), "bicubic": (_bicubic, 2.0), "box": (_box, 0.5)}


@lru_cache(maxsize=256)
def weight_matrix(n_in, n_out, kernel):
    """(n_out, n_in) matrix whose rows are normalized filter taps."""
    fn, support = KERNELS[kernel]
    scale = n_out / n_in
    stretch = max(1.0 / scale, 1.0)
    reach = support * stretch
    mat = np.zeros((n_out, n_in))
    for i in range(n_out):
        centre = (i + 0.5) / scale
        lo = int(np.floor(centre - reach))
        hi = int(np.ceil(centre + reach))
        taps = np.arange(lo, hi + 1)
        w = fn((taps + 0.5 - centre) / stretch)
        total = w.sum()
        if total == 0.0:
            w = np.zeros_like(w)
            w[np.argmin(np.abs(taps + 0.5 - centre))] = 1.0
            total = 1.0
        np.add.at(mat[i], np.clip(taps, 0, n_in - 1), w / total)
    mat.setflags(write=False)
    return mat


def scaled_size(width, height, scale):
    return max(1, int(round(width * scale))), max(1, int(round(height * scale)))


def resample_planes(planes, size, kernel="lanczos3"):
    """Resample float (C,H,W) planes to ``size`` = (width, height)."""
    planes = np.asarray(planes, dtype=np.float64)
    w_out, h_out = size
    _, h, w = planes.shape
    if (w_out, h_out) == (w, h):
        return planes.copy()
    rows = weight_matrix(h, h_out, kernel)
    cols = weight_matrix(w, w_out, kernel)
    return np.einsum("oh,chw,pw->cop", rows, planes, cols, optimize=True)


def resample(img, scale=None, kernel="lanczos3", size=None):
    """Resample an :class:`Image` by ``scale`` or to an explicit ``size`` (width, height).

    8-bit images are rounded and clamped; float images are clamped to [0, 1].
    """
    if kernel not in KERNELS:
        raise ValueError(f"unknown resampling kernel {kernel!r}")
    if size is None:
        if scale is None or scale <= 0:
            raise ValueError("need a positive scale or an explicit size")
        size = scaled_size(img.width, img.height, scale)
    if tuple(size) == (img.width, img.height):
        return img.copy()
    out = resample_planes(img.planes, size, kernel)
    if img.depth == "u8":
        return Image(to_u8(out), img.colorspace)
    return Image(np.clip(out, 0.0, 1.0), img.colorspace)
