"""Quality and rate metrics, RD curves and Bjontegaard delta rate."""

import csv
import io
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from licomp.codec.image import luma
from licomp.errors import DimensionError

log = logging.getLogger(__name__)

LOSSLESS_PSNR = math.inf
MS_SSIM_WEIGHTS = np.array([0.0448, 0.2856, 0.3001, 0.2363, 0.1333])
_WIN = 11
_SIGMA = 1.5
_K1, _K2 = 0.01, 0.03


def _check_pair(a, b):
    if a.planes.shape != b.planes.shape:
        raise DimensionError(f"image shapes differ: {a.planes.shape} vs {b.planes.shape}")
    if a.depth != b.depth:
        raise DimensionError(f"image depths differ: {a.depth} vs {b.depth}")


def psnr(a, b):
    """PSNR over all planes; identical images give :data:`LOSSLESS_PSNR` (+inf)."""
    _check_pair(a, b)
    diff = a.planes.astype(np.float64) - b.planes.astype(np.float64)
    err = float(np.mean(diff * diff))
    if err == 0.0:
        return LOSSLESS_PSNR
    return 10.0 * math.log10(a.max_value ** 2 / err)


def _gaussian(size=_WIN, sigma=_SIGMA):
    x = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    g = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return g / g.sum()


def _blur_valid(img, g):
    rows = sliding_window_view(img, g.size, axis=1) @ g
    return sliding_window_view(rows, g.size, axis=0) @ g


def _ssim_components(x, y, data_range):
    g = _gaussian()
    c1 = (_K1 * data_range) ** 2
    c2 = (_K2 * data_range) ** 2
    mu1, mu2 = _blur_valid(x, g), _blur_valid(y, g)
    s11 = _blur_valid(x * x, g) - mu1 * mu1
    s22 = _blur_valid(y * y, g) - mu2 * mu2
    s12 = _blur_valid(x * y, g) - mu1 * mu2
    cs = (2.0 * s12 + c2) / (s11 + s22 + c2)
    lum = (2.0 * mu1 * mu2 + c1) / (mu1 * mu1 + mu2 * mu2 + c1)
    return float(np.mean(lum * cs)), float(np.mean(cs))


def _half(img):
    h, w = img.shape[0] // 2 * 2, img.shape[1] // 2 * 2
    img = img[:h, :w]
    return 0.25 * (img[0::2, 0::2] + img[1::2, 0::2] + img[0::2, 1::2] + img[1::2, 1::2])


def ms_ssim_scales(min_dim):
    """Number of dyadic scales whose coarsest level still fits the 11x11 window."""
    scales = 0
    while scales < 5 and min_dim >= _WIN:
        scales += 1
        min_dim //= 2
    return scales


def ms_ssim_planes(x, y, data_range=255.0):
    """MS-SSIM of two float luma planes (Wang et al. constants)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise DimensionError(f"plane shapes differ: {x.shape} vs {y.shape}")
    scales = ms_ssim_scales(min(x.shape))
    if scales == 0:
        raise DimensionError(f"image {x.shape} smaller than the {_WIN}x{_WIN} window")
    weights = MS_SSIM_WEIGHTS
    if scales < len(MS_SSIM_WEIGHTS):
        # truncated pyramids renormalize; the full five-scale set keeps the standard exponents
        weights = MS_SSIM_WEIGHTS[:scales] / MS_SSIM_WEIGHTS[:scales].sum()
    value = 1.0
    for j in range(scales):
        ssim, cs = _ssim_components(x, y, data_range)
        term = ssim if j == scales - 1 else cs
        # negative structure terms would need complex powers
        value *= max(term, 0.0) ** weights[j]
        if j < scales - 1:
            x, y = _half(x), _half(y)
    return float(min(max(value, 0.0), 1.0))


def ms_ssim(a, b):
    """MS-SSIM on the luma plane of two images."""
    _check_pair(a, b)
    return ms_ssim_planes(luma(a), luma(b), a.max_value)


def msssim_db(value):
    return -10.0 * math.log10(max(1.0 - value, 1e-12))


@dataclass
class RdPoint:
    bpp: float
    psnr: float
    ms_ssim: float
    codec: str = ""
    config: str = ""


@dataclass
class RdCurve:
    label: str
    points: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    def __post_init__(self):
        self.points = sorted(self.points, key=lambda p: p.bpp)

    def add(self, point):
        self.points.append(point)
        self.points.sort(key=lambda p: p.bpp)

    def rates(self):
        return np.array([p.bpp for p in self.points])

    def qualities(self, metric="psnr"):
        if metric == "psnr":
            return np.array([p.psnr for p in self.points])
        if metric == "msssim_db":
            return np.array([msssim_db(p.ms_ssim) for p in self.points])
        raise ValueError(f"unknown quality axis {metric!r}")


def _cubic_log_rate(curve, metric):
    rate = curve.rates()
    q = curve.qualities(metric)
    if len(rate) < 4:
        raise ValueError(f"curve {curve.label!r} needs at least 4 points, has {len(rate)}")
    if np.any(np.diff(rate) <= 0):
        raise ValueError(f"curve {curve.label!r} rates must be strictly increasing")
    if not np.all(np.isfinite(q)):
        raise ValueError(f"curve {curve.label!r} has non-finite quality values")
    if np.ptp(q) == 0:
        raise ValueError(f"curve {curve.label!r} has a flat quality axis")
    return np.polyfit(q, np.log10(rate), 3), q.min(), q.max()


def bd_rate(anchor, test, metric="psnr"):
    """Average rate difference (percent) of ``test`` vs ``anchor`` at equal quality.

    Cubic fit of log10(rate) against quality, integrated over the shared
    quality interval.  Negative means ``test`` needs fewer bits.
    """
    pa, lo_a, hi_a = _cubic_log_rate(anchor, metric)
    pt, lo_t, hi_t = _cubic_log_rate(test, metric)
    lo, hi = max(lo_a, lo_t), min(hi_a, hi_t)
    if hi <= lo:
        raise ValueError("RD curves do not overlap in quality")
    ia, it = np.polyint(pa), np.polyint(pt)
    avg = ((np.polyval(it, hi) - np.polyval(it, lo)) - (np.polyval(ia, hi) - np.polyval(ia, lo))) / (hi - lo)
    return float((10.0 ** avg - 1.0) * 100.0)


def bd_rate_report(anchor, test, metrics=("psnr", "msssim_db")):
    """Plain-text BD-rate summary of ``test`` against ``anchor``, one line per quality axis.

    Axes that cannot be evaluated (too few points, no overlap) are reported
    as ``n/a`` with the reason instead of raising.
    """
    lines = [f"BD-rate  anchor={anchor.label}  test={test.label}"]
    for metric in metrics:
        try:
            lines.append(f"  {metric:<10} {bd_rate(anchor, test, metric):+.2f}%")
        except ValueError as exc:
            lines.append(f"  {metric:<10} n/a ({exc})")
    return "\n".join(lines) + "\n"


def config_label(cfg):
    if isinstance(cfg, dict):
        return ";".join(f"{k}={v}" for k, v in cfg.items())
    return str(cfg)


def rd_sweep(corpus, encode, decode, configs, label=""):
    """Run ``encode(img, cfg) -> Bitstream`` / ``decode(bs) -> Image`` over a corpus.

    One :class:`RdPoint` per config: pooled bpp (all stream bits over all
    pixels), per-image mean PSNR and MS-SSIM.  A config whose encode or
    decode fails on any image is skipped and recorded in ``curve.warnings``.
    """
    if not corpus or not configs:
        raise ValueError("rd_sweep needs a non-empty corpus and config list")
    curve = RdCurve(label)
    for cfg in configs:
        bits = pixels = 0
        ps, ss = [], []
        try:
            for img in corpus:
                bs = encode(img, cfg)
                rec = decode(bs)
                bits += bs.num_bits
                pixels += img.width * img.height
                ps.append(psnr(img, rec))
                ss.append(ms_ssim(img, rec))
        except Exception as exc:  # noqa: BLE001 - a failing config must not abort the sweep
            msg = f"{label} config {config_label(cfg)} skipped: {type(exc).__name__}: {exc}"
            log.warning(msg)
            curve.warnings.append(msg)
            continue
        curve.add(RdPoint(bits / pixels, float(np.mean(ps)), float(np.mean(ss)), label, config_label(cfg)))
    return curve


CSV_FIELDS = ("codec", "config", "bpp", "psnr_db", "ms_ssim")


def rd_rows(curves):
    for curve in curves:
        for p in curve.points:
            yield {
                "codec": p.codec or curve.label,
                "config": p.config,
                "bpp": f"{p.bpp:.6f}",
                "psnr_db": "inf" if math.isinf(p.psnr) else f"{p.psnr:.4f}",
                "ms_ssim": f"{p.ms_ssim:.6f}",
            }


def write_rd_csv(curves, fh=None):
    """Write curves as CSV to ``fh``; returns the text when ``fh`` is None."""
    buf = fh if fh is not None else io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
    writer.writeheader()
    for row in rd_rows(curves):
        writer.writerow(row)
    return None if fh is not None else buf.getvalue()


def read_rd_csv(fh):
    curves = {}
    for row in csv.DictReader(fh):
        curve = curves.setdefault(row["codec"], RdCurve(row["codec"]))
        curve.add(RdPoint(float(row["bpp"]), float(row["psnr_db"]), float(row["ms_ssim"]),
                          row["codec"], row["config"]))
    return list(curves.values())
