"""Image corpora and seeded patch sampling for training."""

import hashlib
import logging
from pathlib import Path

import numpy as np

from licomp.codec.image import Image, convert_colorspace
from licomp.io import load_image

log = logging.getLogger(__name__)

IMAGE_SUFFIXES = (".ppm", ".pgm", ".png")
SPLITS = ("train", "valid", "all")


def split_of(path, valid_percent=10):
    """Deterministic split from a hash of the file name (not its directory)."""
    digest = hashlib.sha1(Path(path).name.encode("utf-8")).digest()
    return "valid" if int.from_bytes(digest[:4], "little") % 100 < valid_percent else "train"


class Corpus:
    """Image files under a directory (or an explicit list), loaded on access."""

    def __init__(self, source, split="all"):
        if split not in SPLITS:
            raise ValueError(f"split must be one of {SPLITS}, got {split!r}")
        if isinstance(source, (str, Path)):
            root = Path(source)
            if not root.is_dir():
                raise FileNotFoundError(f"corpus directory not found: {root}")
            paths = sorted(p for p in root.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
        else:
            paths = [Path(p) for p in source]
        if split != "all":
            paths = [p for p in paths if split_of(p) == split]
        if not paths:
            raise ValueError(f"corpus {source!s} has no images in split {split!r}")
        self.paths = paths
        self.split = split

    def __len__(self):
        return len(self.paths)

    def __getitem__(self, i):
        return load_image(self.paths[i])

    def __iter__(self):
        for p in self.paths:
            yield load_image(p)


def _as_input(crop, mode, rng):
    if mode == "u8":
        return crop.planes
    if mode == "cae":
        # one plane (Y, Cb or Cr), centred 8-bit units
        planes = convert_colorspace(crop, "YCbCr").planes if crop.colorspace == "RGB" else crop.planes
        return planes[rng.integers(planes.shape[0])][None].astype(np.float32) - 128.0
    if mode == "gan":
        rgb = crop.planes if crop.colorspace == "RGB" else np.repeat(crop.planes, 3, axis=0)
        return rgb.astype(np.float32) / 127.5 - 1.0
    if mode == "sr":
        from licomp.codec.image import luma

        return (luma(crop) / 255.0)[None].astype(np.float32)
    raise ValueError(f"unknown patch mode {mode!r}")


_CHANNELS = {"cae": 1, "gan": 3, "sr": 1}


def crop_origins(rng, height, width, size, count):
    """``count`` uniformly drawn top-left corners of ``size`` crops."""
    oy = rng.integers(0, height - size + 1, size=count)
    ox = rng.integers(0, width - size + 1, size=count)
    return oy, ox


def sample_patches(images, size, count, seed, mode="u8"):
    """Seeded uniform crops as a (count, C, size, size) batch.

    ``mode`` picks the value range: ``"u8"`` raw samples, ``"cae"`` one centred
    plane, ``"gan"`` RGB in [-1, 1], ``"sr"`` unit luma.  Images smaller than
    ``size`` are skipped with a warning.
    """
    images = list(images)
    usable = []
    for i, img in enumerate(images):
        if img.width < size or img.height < size:
            log.warning("skipping image %d (%dx%d): smaller than %d-pixel patches", i, img.width, img.height, size)
        else:
            usable.append(img)
    channels = _CHANNELS.get(mode, usable[0].channels if usable else 3)
    dtype = np.uint8 if mode == "u8" else np.float32
    if count == 0:
        return np.zeros((0, channels, size, size), dtype=dtype)
    if not usable:
        raise ValueError(f"no image is at least {size}x{size}")
    rng = np.random.default_rng(seed)
    which = rng.integers(0, len(usable), size=count)
    batch = np.empty((count, channels, size, size), dtype=dtype)
    for k, idx in enumerate(which):
        img = usable[idx]
        oy, ox = crop_origins(rng, img.height, img.width, size, 1)
        crop = Image(img.planes[:, oy[0]:oy[0] + size, ox[0]:ox[0] + size], img.colorspace)
        values = _as_input(crop, mode, rng)
        if values.shape[0] != channels:
            raise ValueError(f"mixed plane counts in corpus; use a fixed patch mode (got {values.shape[0]})")
        batch[k] = values
    return batch
