"""PCA -> quantize -> range-code chain for latent feature volumes (CAE and GAN)."""

from dataclasses import dataclass

import numpy as np

from licomp.codec.image import FeatureBlock
from licomp.codec.pca import PcaBasis, block_samples, pca_apply, pca_fit
from licomp.codec.quant import STEP_FLOOR, QuantParams, dequantize, quantize
from licomp.codec.rangecoder import range_decode, range_encode
from licomp.errors import BitstreamError


@dataclass
class LatentCode:
    qp: QuantParams
    basis: PcaBasis | None
    codes: np.ndarray  # (C, h, w) ints, channel 0 = largest eigenvalue
    data: bytes

    @property
    def symbol_count(self):
        return int(self.codes.size)


def fit_basis(fb, identity_fallback=False):
    """Per-block PCA; falls back to identity (or ``None``) when there are too few locations."""
    samples = block_samples(fb)
    if samples.shape[0] > fb.channels:
        return pca_fit(samples).as_stored()
    if identity_fallback:
        return PcaBasis.identity(fb.channels)
    return None


def encode_latent(fb, bits, basis=None, min_step=STEP_FLOOR):
    rotated = pca_apply(fb, basis, "forward") if basis is not None else fb
    codes, qp = quantize(rotated, bits, min_step)
    data = range_encode(codes.reshape(-1), 1 << bits)
    return LatentCode(qp, basis, codes, data)


def reconstruct_latent(codes, qp, basis):
    fb = dequantize(codes, qp)
    return pca_apply(fb, basis, "inverse") if basis is not None else fb


def decode_latent(data, qp, basis, shape):
    c, h, w = shape
    if qp.mins.shape[0] != c:
        raise BitstreamError(f"latent section has {qp.mins.shape[0]} channels, expected {c}")
    codes = range_decode(data, c * h * w, 1 << qp.bits).reshape(shape)
    return reconstruct_latent(codes, qp, basis)


def as_block(values):
    return FeatureBlock(np.asarray(values, dtype=np.float64))
