"""Super-resolution-assisted coding: resampling, SRCNN, base codecs and routing."""

from licomp.sr.codec import (
    AdaptiveConfig, BaseCodecParams, RoutingDecision, adaptive_route, base_codec, fixed_route,
    pre_psnr, sr_decode, sr_encode,
)
from licomp.sr.resample import resample
from licomp.sr.srcnn import SrcnnModel, srcnn_forward, srcnn_train_step

__all__ = [
    "AdaptiveConfig", "BaseCodecParams", "RoutingDecision", "SrcnnModel", "adaptive_route",
    "base_codec", "fixed_route", "pre_psnr", "resample", "sr_decode", "sr_encode",
    "srcnn_forward", "srcnn_train_step",
]
