"""Image and feature-volume carriers plus BT.601 full-range colour conversion."""

from dataclasses import dataclass

import numpy as np

from licomp.errors import DimensionError

_PLANES = {"RGB": 3, "YCbCr": 3, "Gray": 1}

# JFIF / BT.601 full-range
_RGB2YCC = np.array(
    [[0.299, 0.587, 0.114],
     [-0.168736, -0.331264, 0.5],
     [0.5, -0.418688, -0.081312]]
)
_YCC2RGB = np.array(
    [[1.0, 0.0, 1.402],
     [1.0, -0.344136, -0.714136],
     [1.0, 1.772, 0.0]]
)


@dataclass
class Image:
    """Planar image: ``planes`` is (C, H, W), uint8 or float in [0, 1]."""

    planes: np.ndarray
    colorspace: str = "RGB"

    def __post_init__(self):
        self.planes = np.asarray(self.planes)
        if self.planes.ndim != 3:
            raise DimensionError(f"image planes must be (C,H,W), got shape {self.planes.shape}")
        if self.colorspace not in _PLANES:
            raise ValueError(f"unknown colorspace {self.colorspace!r}")
        if self.planes.shape[0] != _PLANES[self.colorspace]:
            raise DimensionError(
                f"{self.colorspace} needs {_PLANES[self.colorspace]} planes, got {self.planes.shape[0]}"
            )
        if self.planes.dtype != np.uint8 and not np.issubdtype(self.planes.dtype, np.floating):
            raise ValueError(f"unsupported sample type {self.planes.dtype}")

    @property
    def channels(self):
        return self.planes.shape[0]

    @property
    def height(self):
        return self.planes.shape[1]

    @property
    def width(self):
        return self.planes.shape[2]

    @property
    def depth(self):
        return "u8" if self.planes.dtype == np.uint8 else "float"

    @property
    def max_value(self):
        return 255.0 if self.depth == "u8" else 1.0

    def to_float(self):
        """Unit-range float copy."""
        if self.depth == "float":
            return Image(self.planes.astype(np.float64), self.colorspace)
        return Image(self.planes.astype(np.float64) / 255.0, self.colorspace)

    def to_u8(self):
        if self.depth == "u8":
            return self
        return Image(to_u8(self.planes * 255.0), self.colorspace)

    def copy(self):
        return Image(self.planes.copy(), self.colorspace)


@dataclass
class FeatureBlock:
    """Channel-major latent volume (C, h, w)."""

    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values)
        if self.values.ndim != 3:
            raise DimensionError(f"feature block must be (C,h,w), got shape {self.values.shape}")

    @property
    def channels(self):
        return self.values.shape[0]

    @property
    def height(self):
        return self.values.shape[1]

    @property
    def width(self):
        return self.values.shape[2]


def to_u8(values):
    """Round half-to-even and clamp to [0, 255]."""
    return np.clip(np.rint(values), 0, 255).astype(np.uint8)


def rgb_to_ycbcr_float(rgb, offset):
    return np.tensordot(_RGB2YCC, rgb, axes=1) + np.array([0.0, offset, offset])[:, None, None]


def ycbcr_to_rgb_float(ycc, offset):
    centered = ycc - np.array([0.0, offset, offset])[:, None, None]
    return np.tensordot(_YCC2RGB, centered, axes=1)


def luma(img):
    """Luma plane as float in the image's own value range."""
    p = img.planes.astype(np.float64)
    if img.colorspace == "RGB":
        return np.tensordot(_RGB2YCC[0], p, axes=1)
    return p[0]


def convert_colorspace(img, target):
    """Convert between RGB, YCbCr and (one-way) Gray, clamping to the valid range."""
    src = img.colorspace
    if src == target:
        raise ValueError(f"image is already {target}")
    u8 = img.depth == "u8"
    offset = 128.0 if u8 else 0.5
    p = img.planes.astype(np.float64)
    if (src, target) == ("RGB", "YCbCr"):
        out = rgb_to_ycbcr_float(p, offset)
    elif (src, target) == ("YCbCr", "RGB"):
        out = ycbcr_to_rgb_float(p, offset)
    elif (src, target) == ("RGB", "Gray"):
        out = np.tensordot(_RGB2YCC[0], p, axes=1)[None]
    elif (src, target) == ("YCbCr", "Gray"):
        out = p[:1]
    else:
        raise ValueError(f"unsupported colour conversion {src} -> {target}")
    if u8:
        return Image(to_u8(out), target)
    return Image(np.clip(out, 0.0, 1.0), target)


def pad_to_multiple(planes, multiple):
    """Edge-replicate (C,H,W) planes on the right/bottom to a multiple of ``multiple``."""
    h, w = planes.shape[1:]
    pad_b = (-h) % multiple
    pad_r = (-w) % multiple
    if pad_b or pad_r:
        planes = np.pad(planes, ((0, 0), (0, pad_b), (0, pad_r)), mode="edge")
    return planes, pad_r, pad_b
