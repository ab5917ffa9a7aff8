"""Super-resolution-assisted codec around a pluggable base codec.

The encoder runs a reconstruction loop (downsample by 0.5, bicubic up, SRCNN)
and measures the luma PSNR that the resolution change alone costs.  Images
that survive it well take the SRCNN route at half resolution; the rest are
downsampled less (0.7) and restored with lanczos3.

Header (codec id 2)::

    route u8 (0 = LANCZOS, 1 = SRCNN) | orig_w u32 | orig_h u32 | base_kind u8 | qp u8

followed by the inner base-codec stream as the container payload.
"""

import math
from dataclasses import dataclass

import numpy as np

from licomp.codec.bitstream import CODEC_SR, pack_container, read_payload
from licomp.codec.image import Image, convert_colorspace, luma, to_u8
from licomp.errors import BitstreamError, DimensionError
from licomp.sr import bpg
from licomp.sr.dct import dct_decode, dct_encode
from licomp.sr.resample import resample, resample_planes, scaled_size
from licomp.sr.srcnn import srcnn_forward

ROUTE_LANCZOS, ROUTE_SRCNN = "LANCZOS", "SRCNN"
_ROUTE_IDS = {ROUTE_LANCZOS: 0, ROUTE_SRCNN: 1}
_BASE_IDS = {"builtin": 0, "bpg": 1}
MIN_SIDE = 34


@dataclass(frozen=True)
class AdaptiveConfig:
    threshold: float = 33.0
    sr_scale: float = 0.5
    fallback_scale: float = 0.7

    def __post_init__(self):
        if not 0.0 < self.sr_scale < self.fallback_scale <= 1.0:
            raise ValueError(
                f"need 0 < sr_scale < fallback_scale <= 1, got {self.sr_scale}, {self.fallback_scale}"
            )
        if math.isnan(self.threshold):
            raise ValueError("threshold must not be NaN")


@dataclass(frozen=True)
class BaseCodecParams:
    """``kind`` is ``"builtin"`` (DCT, quality 1-100) or ``"bpg"`` (external, QP 0-51)."""

    kind: str = "builtin"
    qp: int = 80

    def __post_init__(self):
        if self.kind == "builtin":
            if not 1 <= self.qp <= 100:
                raise ValueError(f"builtin DCT quality must be in [1, 100], got {self.qp}")
        elif self.kind == "bpg":
            if not 0 <= self.qp <= 51:
                raise ValueError(f"BPG qp must be in [0, 51], got {self.qp}")
        else:
            raise ValueError(f"unknown base codec kind {self.kind!r}")


@dataclass(frozen=True)
class RoutingDecision:
    route: str
    pre_psnr: float
    dims: tuple  # (width, height) handed to the base codec


def base_codec(x, params, direction):
    """``direction="encode"``: Image -> inner bytes; ``"decode"``: bytes -> Image."""
    if direction == "encode":
        if params.kind == "builtin":
            return dct_encode(x, params.qp)
        return bpg.bpg_encode(x, params.qp)
    if direction == "decode":
        if params.kind == "builtin":
            return dct_decode(x)
        return bpg.bpg_decode(x)
    raise ValueError(f"direction must be 'encode' or 'decode', got {direction!r}")


def super_resolve(small, size, model):
    """Bicubic upscale to ``size`` (width, height), then SRCNN on luma; chroma stays bicubic."""
    up = resample_planes(small.to_float().planes, size, "bicubic")
    if small.colorspace == "Gray":
        return Image(to_u8(srcnn_forward(up[0], model)[None] * 255.0), "Gray")
    ycc = convert_colorspace(Image(np.clip(up, 0.0, 1.0), small.colorspace), "YCbCr")
    planes = ycc.planes.copy()
    planes[0] = srcnn_forward(planes[0], model)
    return convert_colorspace(Image(planes, "YCbCr"), "RGB").to_u8()


def _luma_psnr(a, b):
    err = float(np.mean((luma(a) - luma(b)) ** 2))
    return math.inf if err == 0.0 else 10.0 * math.log10(255.0 ** 2 / err)


def pre_psnr(img, model, scale=0.5):
    """Luma PSNR of the SR-only loop: lanczos3 down by ``scale``, bicubic up, SRCNN."""
    small = resample(img.to_u8(), scale, "lanczos3")
    return _luma_psnr(img.to_u8(), super_resolve(small, (img.width, img.height), model))


def _check_size(img):
    if img.width < MIN_SIDE or img.height < MIN_SIDE:
        raise DimensionError(f"SR codec needs at least {MIN_SIDE}x{MIN_SIDE} pixels, got {img.width}x{img.height}")


def decide(pre, img, cfg):
    """Apply the threshold rule to a measured Pre_PSNR."""
    if pre > cfg.threshold:
        return RoutingDecision(ROUTE_SRCNN, pre, scaled_size(img.width, img.height, cfg.sr_scale))
    return RoutingDecision(ROUTE_LANCZOS, pre, scaled_size(img.width, img.height, cfg.fallback_scale))


def adaptive_route(img, model, cfg=AdaptiveConfig()):
    _check_size(img)
    if math.isinf(cfg.threshold) and cfg.threshold > 0:
        return decide(math.nan, img, cfg)
    return decide(pre_psnr(img, model, cfg.sr_scale), img, cfg)


def fixed_route(img, route, scale):
    """A decision that bypasses the loop (for non-adaptive baselines)."""
    _check_size(img)
    return RoutingDecision(route, math.nan, scaled_size(img.width, img.height, scale))


def sr_encode(img, model, cfg=AdaptiveConfig(), base=BaseCodecParams(), decision=None):
    """Route, downsample with lanczos3, run the base codec and wrap it in a container."""
    img = img.to_u8()
    if img.colorspace == "YCbCr":
        img = convert_colorspace(img, "RGB")
    if decision is None:
        decision = adaptive_route(img, model, cfg)
    small = resample(img, size=decision.dims, kernel="lanczos3")
    inner = base_codec(small, base, "encode")
    header = np.array([_ROUTE_IDS[decision.route]], dtype="<u1").tobytes()
    header += np.array([img.width, img.height], dtype="<u4").tobytes()
    header += np.array([_BASE_IDS[base.kind], base.qp], dtype="<u1").tobytes()
    return pack_container(CODEC_SR, img.width, img.height, header, inner)


def read_sr_header(bs):
    r = bs.reader(CODEC_SR)
    route_id, width, height, kind_id, qp = r.get("BIIBB")
    routes = {v: k for k, v in _ROUTE_IDS.items()}
    kinds = {v: k for k, v in _BASE_IDS.items()}
    if route_id not in routes:
        raise BitstreamError(f"invalid SR route flag {route_id}")
    if kind_id not in kinds:
        raise BitstreamError(f"invalid base codec kind {kind_id}")
    if (width, height) != (bs.width, bs.height):
        raise BitstreamError("SR header dims disagree with the container")
    try:
        base = BaseCodecParams(kinds[kind_id], qp)
    except ValueError as exc:
        raise BitstreamError(str(exc)) from None
    return routes[route_id], (width, height), base, read_payload(r)


def sr_decode(bs, model=None):
    """Decode to the original dims; the LANCZOS route never touches ``model``."""
    route, size, base, inner = read_sr_header(bs)
    small = base_codec(inner, base, "decode")
    if route == ROUTE_LANCZOS:
        return resample(small, size=size, kernel="lanczos3")
    if model is None:
        raise ValueError("this stream took the SRCNN route; an SRCNN model is required to decode it")
    return super_resolve(small, size, model)
