"""Self-contained JPEG-like base codec.

8x8 orthonormal block DCT on YCbCr with 4:2:0 chroma, the usual
quality-scaled luma/chroma quantization tables and range-coded coefficients.
Coefficients are coded per block in zigzag order: a DC difference category
plus raw magnitude bits, an end-of-block position, then a category (plus raw
bits) for every AC coefficient before it.  Categories use adaptive models
keyed by component type, frequency band and the previous coefficient's size.

Stream layout::

    width u32 | height u32 | quality u8 | planes u8 | coded bytes
"""

import numpy as np
from numba import njit

from licomp.codec.bitstream import ByteReader, ByteWriter
from licomp.codec.image import Image, convert_colorspace, to_u8
from licomp.codec.rangecoder import (
    _dec_bits, _dec_init, _dec_symbol, _enc_bits, _enc_finish, _enc_init, _enc_symbol, new_model,
)
from licomp.errors import BitstreamError, DimensionError
from licomp.sr.resample import resample_planes

LUMA_TABLE = np.array([
    16, 11, 10, 16, 24, 40, 51, 61,
    12, 12, 14, 19, 26, 58, 60, 55,
    14, 13, 16, 24, 40, 57, 69, 56,
    14, 17, 22, 29, 51, 87, 80, 62,
    18, 22, 37, 56, 68, 109, 103, 77,
    24, 35, 55, 64, 81, 104, 113, 92,
    49, 64, 78, 87, 103, 121, 120, 101,
    72, 92, 95, 98, 112, 100, 103, 99,
], dtype=np.float64).reshape(8, 8)

CHROMA_TABLE = np.full((8, 8), 99.0)
CHROMA_TABLE[:4, :4] = np.array([
    [17, 18, 24, 47], [18, 21, 26, 66], [24, 26, 56, 99], [47, 66, 99, 99],
], dtype=np.float64)


def _zigzag():
    order = sorted(((i, j) for i in range(8) for j in range(8)),
                   key=lambda p: (p[0] + p[1], p[1] if (p[0] + p[1]) % 2 == 0 else p[0]))
    return np.array([i * 8 + j for i, j in order])


ZIGZAG = _zigzag()


def _dct_matrix():
    k = np.arange(8)[:, None]
    n = np.arange(8)[None, :]
    m = np.sqrt(2.0 / 8.0) * np.cos(np.pi * (2 * n + 1) * k / 16.0)
    m[0] /= np.sqrt(2.0)
    return m


DCT8 = _dct_matrix()


def quant_table(quality, chroma=False):
    """Quality-scaled table (1 = coarsest, 100 = all ones)."""
    if not 1 <= quality <= 100:
        raise ValueError(f"DCT quality must be in [1, 100], got {quality}")
    scale = 5000.0 / quality if quality < 50 else 200.0 - 2.0 * quality
    base = CHROMA_TABLE if chroma else LUMA_TABLE
    return np.clip(np.floor((base * scale + 50.0) / 100.0), 1.0, 255.0)


# -- model layout -----------------------------------------------------------
DC_ALPHA, EOB_ALPHA, AC_ALPHA = 17, 65, 16
_BANDS = 4
_PER_TYPE = 2 + _BANDS * 3
N_MODELS = 2 * _PER_TYPE


def _band_table():
    band = np.zeros(64, dtype=np.int64)
    band[3:10] = 1
    band[10:28] = 2
    band[28:] = 3
    return band


BAND = _band_table()


def _new_models():
    freq = np.zeros((N_MODELS, EOB_ALPHA), dtype=np.int64)
    tree = np.zeros((N_MODELS, EOB_ALPHA + 1), dtype=np.int64)
    info = np.zeros((N_MODELS, 4), dtype=np.int64)
    for t in range(2):
        for k in range(_PER_TYPE):
            alpha = DC_ALPHA if k == 0 else EOB_ALPHA if k == 1 else AC_ALPHA
            f, tr, inf = new_model(alpha)
            m = t * _PER_TYPE + k
            freq[m, :alpha] = f
            tree[m, :alpha + 1] = tr
            info[m] = inf
    return freq, tree, info


@njit(cache=True)
def _category(v):
    a = -v if v < 0 else v
    c = 0
    while a > 0:
        c += 1
        a >>= 1
    return c


@njit(cache=True)
def _prev_ctx(cat):
    if cat == 0:
        return 0
    if cat <= 2:
        return 1
    return 2


@njit(cache=True)
def _encode_plane(blocks, ctype, band, freq, tree, info, st, out):
    base = ctype * 14
    pred = 0
    for b in range(blocks.shape[0]):
        blk = blocks[b]
        diff = blk[0] - pred
        pred = blk[0]
        c = _category(diff)
        m = base
        _enc_symbol(st, out, freq[m], tree[m], info[m], c)
        if c > 0:
            _enc_bits(st, out, diff if diff > 0 else diff + (1 << c) - 1, c)
        eob = 0
        for k in range(63, 0, -1):
            if blk[k] != 0:
                eob = k
                break
        m = base + 1
        _enc_symbol(st, out, freq[m], tree[m], info[m], eob)
        prev = c
        for k in range(1, eob + 1):
            v = blk[k]
            c = _category(v)
            m = base + 2 + band[k] * 3 + _prev_ctx(prev)
            _enc_symbol(st, out, freq[m], tree[m], info[m], c)
            if c > 0:
                _enc_bits(st, out, v if v > 0 else v + (1 << c) - 1, c)
            prev = c


@njit(cache=True)
def _decode_plane(data, st, ctype, band, freq, tree, info, blocks):
    base = ctype * 14
    pred = 0
    for b in range(blocks.shape[0]):
        m = base
        c = _dec_symbol(st, data, freq[m], tree[m], info[m])
        if c < 0:
            return False
        diff = 0
        if c > 0:
            raw = _dec_bits(st, data, c)
            if raw < 0:
                return False
            diff = raw if raw >= (1 << (c - 1)) else raw - (1 << c) + 1
        pred += diff
        blocks[b, 0] = pred
        m = base + 1
        eob = _dec_symbol(st, data, freq[m], tree[m], info[m])
        if eob < 0:
            return False
        prev = c
        for k in range(1, eob + 1):
            m = base + 2 + band[k] * 3 + _prev_ctx(prev)
            c = _dec_symbol(st, data, freq[m], tree[m], info[m])
            if c < 0:
                return False
            v = 0
            if c > 0:
                raw = _dec_bits(st, data, c)
                if raw < 0:
                    return False
                v = raw if raw >= (1 << (c - 1)) else raw - (1 << c) + 1
            blocks[b, k] = v
            prev = c
        for k in range(eob + 1, 64):
            blocks[b, k] = 0
    return True


def _to_blocks(plane):
    """(H, W) -> (nby * nbx, 8, 8) after replicate padding to a multiple of 8."""
    h, w = plane.shape
    ph, pw = -h % 8, -w % 8
    plane = np.pad(plane, ((0, ph), (0, pw)), mode="edge")
    nby, nbx = plane.shape[0] // 8, plane.shape[1] // 8
    return plane.reshape(nby, 8, nbx, 8).transpose(0, 2, 1, 3).reshape(-1, 8, 8), (nby, nbx)


def _from_blocks(blocks, grid, h, w):
    nby, nbx = grid
    return blocks.reshape(nby, nbx, 8, 8).transpose(0, 2, 1, 3).reshape(nby * 8, nbx * 8)[:h, :w]


def _plane_dims(width, height, planes):
    dims = [(height, width)]
    if planes == 3:
        dims += [((height + 1) // 2, (width + 1) // 2)] * 2
    return dims


def _split_planes(img):
    """Float planes in [0, 255]: Y (full size) and, for colour, 2x2-averaged Cb, Cr."""
    if img.colorspace == "Gray":
        return [img.to_float().planes[0] * 255.0]
    ycc = convert_colorspace(img.to_float(), "YCbCr") if img.colorspace == "RGB" else img.to_float()
    out = [ycc.planes[0] * 255.0]
    for c in (1, 2):
        p = ycc.planes[c] * 255.0
        p = np.pad(p, ((0, p.shape[0] % 2), (0, p.shape[1] % 2)), mode="edge")
        out.append(0.25 * (p[0::2, 0::2] + p[1::2, 0::2] + p[0::2, 1::2] + p[1::2, 1::2]))
    return out


def dct_encode(img, quality):
    """Encode an :class:`Image` (RGB, YCbCr or Gray) into builtin-DCT bytes."""
    if img.width < 1 or img.height < 1:
        raise DimensionError("cannot encode an empty image")
    planes = _split_planes(img)
    freq, tree, info = _new_models()
    coded = []
    total_blocks = 0
    for idx, plane in enumerate(planes):
        chroma = idx > 0
        blocks, _ = _to_blocks(plane - 128.0)
        coef = DCT8 @ blocks @ DCT8.T
        q = np.round(coef / quant_table(quality, chroma)).astype(np.int64)
        coded.append((q.reshape(-1, 64)[:, ZIGZAG], int(chroma)))
        total_blocks += q.shape[0]
    out = np.empty(total_blocks * 64 * 5 + 64, dtype=np.uint8)
    st = np.zeros(5, dtype=np.int64)
    _enc_init(st)
    for zz, ctype in coded:
        _encode_plane(np.ascontiguousarray(zz), ctype, BAND, freq, tree, info, st, out)
    n = _enc_finish(st, out)
    w = ByteWriter().put("IIBB", img.width, img.height, quality, len(planes))
    return w.put_bytes(out[1:n].tobytes()).getvalue()


def dct_decode(data):
    """Inverse of :func:`dct_encode`; returns an 8-bit RGB or Gray image."""
    r = ByteReader(data)
    width, height, quality, nplanes = r.get("IIBB")
    if nplanes not in (1, 3) or width == 0 or height == 0:
        raise BitstreamError(f"bad DCT header: {width}x{height}, {nplanes} planes")
    if not 1 <= quality <= 100:
        raise BitstreamError(f"bad DCT quality {quality}")
    buf = np.frombuffer(r.get_bytes(r.remaining()), dtype=np.uint8)
    freq, tree, info = _new_models()
    st = np.zeros(3, dtype=np.int64)
    if not _dec_init(st, buf):
        raise BitstreamError("DCT payload truncated")
    planes = []
    for idx, (h, w) in enumerate(_plane_dims(width, height, nplanes)):
        grid = ((h + 7) // 8, (w + 7) // 8)
        zz = np.zeros((grid[0] * grid[1], 64), dtype=np.int64)
        if not _decode_plane(buf, st, int(idx > 0), BAND, freq, tree, info, zz):
            raise BitstreamError(f"DCT payload truncated in plane {idx}")
        q = np.empty_like(zz)
        q[:, ZIGZAG] = zz
        coef = q.reshape(-1, 8, 8) * quant_table(quality, idx > 0)
        planes.append(_from_blocks(DCT8.T @ coef @ DCT8, grid, h, w) + 128.0)
    if nplanes == 1:
        return Image(to_u8(planes[0][None]), "Gray")
    chroma = resample_planes(np.stack(planes[1:]), (width, height), "bicubic")
    ycc = Image(np.clip(np.concatenate([planes[0][None], chroma]) / 255.0, 0.0, 1.0), "YCbCr")
    rgb = convert_colorspace(ycc, "RGB")
    return rgb.to_u8()
