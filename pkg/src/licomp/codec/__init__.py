"""Pipeline stages shared by the three codecs."""

from licomp.codec.bitstream import CODEC_CAE, CODEC_GAN, CODEC_SR, Bitstream
from licomp.codec.image import FeatureBlock, Image, convert_colorspace, luma
from licomp.codec.pca import PcaBasis, pca_apply, pca_fit
from licomp.codec.quant import QuantParams, dequantize, quantize
from licomp.codec.rangecoder import range_decode, range_encode

__all__ = [
    "Bitstream", "CODEC_CAE", "CODEC_GAN", "CODEC_SR", "FeatureBlock", "Image", "PcaBasis",
    "QuantParams", "convert_colorspace", "dequantize", "luma", "pca_apply", "pca_fit",
    "quantize", "range_decode", "range_encode",
]
