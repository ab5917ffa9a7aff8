"""Seeded synthetic images for toy corpora and tests.

``texture`` in [0, 1] moves an image from smooth gradients and blobs towards
fine stripes and pixel noise.
"""

import numpy as np

from licomp.codec.image import Image, to_u8


def _field(rng, h, w, texture):
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    out = np.zeros((h, w))
    # low-frequency structure
    for _ in range(3):
        fx, fy = rng.uniform(0.5, 2.5, size=2) * 2 * np.pi / max(h, w)
        ph = rng.uniform(0, 2 * np.pi)
        out += rng.uniform(20, 45) * np.sin(fx * xx + fy * yy + ph)
    out += rng.uniform(-0.6, 0.6) * (xx - w / 2) + rng.uniform(-0.6, 0.6) * (yy - h / 2)
    for _ in range(rng.integers(1, 4)):
        cy, cx = rng.uniform(0, h), rng.uniform(0, w)
        r = rng.uniform(0.1, 0.3) * min(h, w)
        out += rng.uniform(-50, 50) * (((yy - cy) ** 2 + (xx - cx) ** 2) < r * r)
    # fine detail scaled by texture
    if texture > 0:
        f = rng.uniform(0.25, 0.45) * 2 * np.pi
        ang = rng.uniform(0, np.pi)
        out += texture * 35 * np.sin(f * (np.cos(ang) * xx + np.sin(ang) * yy))
        out += texture * 40 * rng.standard_normal((h, w))
    return out


def synthetic_image(seed, size=(64, 64), texture=0.3, color=True):
    """Deterministic 8-bit test image (RGB by default); ``size`` is (height, width)."""
    rng = np.random.default_rng(seed)
    h, w = size
    base = 128 + _field(rng, h, w, texture)
    if not color:
        return Image(to_u8(base)[None], "Gray")
    tint = [base + rng.uniform(-30, 30) + 0.35 * _field(rng, h, w, texture * 0.5) for _ in range(3)]
    return Image(to_u8(np.stack(tint)), "RGB")


def synthetic_corpus(n, seed=0, size=(64, 64), texture=(0.0, 1.0), color=True):
    """``n`` images with texture levels spread evenly over the ``texture`` range."""
    lo, hi = texture
    levels = np.linspace(lo, hi, n) if n > 1 else [lo]
    return [synthetic_image(seed * 1000 + i, size, float(t), color) for i, t in enumerate(levels)]
