"""2-D convolution and transposed convolution (NCHW, cross-correlation, zero padding)."""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from licomp.errors import DimensionError
from licomp.tensor.core import make_result, tensor

_AXES = ("batch", "channel", "height", "width")


def _windows(xp, kh, kw, stride, ho, wo):
    win = sliding_window_view(xp, (kh, kw), axis=(2, 3))
    return win[:, :, ::stride, ::stride][:, :, :ho, :wo]


def _scatter(g, w, stride, out_hw):
    """Adjoint of the strided window gather: g (N,O,Ho,Wo), w (O,C,kh,kw) -> (N,C,*out_hw)."""
    n, _, ho, wo = g.shape
    c, kh, kw = w.shape[1:]
    cols = np.tensordot(w, g, axes=([0], [1]))  # C,kh,kw,N,Ho,Wo
    out = np.zeros((c, n) + tuple(out_hw), dtype=np.result_type(g, w))
    hspan = stride * (ho - 1) + 1
    wspan = stride * (wo - 1) + 1
    for i in range(kh):
        for j in range(kw):
            out[:, :, i:i + hspan:stride, j:j + wspan:stride] += cols[:, i, j]
    return out.transpose(1, 0, 2, 3)


def _check_common(x, w, b, stride, pad, cin_axis_name):
    if x.ndim != 4:
        raise DimensionError(f"input must be 4-D (N,C,H,W), got rank {x.ndim}")
    if w.ndim != 4:
        raise DimensionError(f"weight must be 4-D, got rank {w.ndim}")
    if stride < 1:
        raise DimensionError(f"stride must be positive, got {stride}")
    if pad < 0:
        raise DimensionError(f"pad must be non-negative, got {pad}")
    if x.shape[1] != w.shape[0 if cin_axis_name == "transpose" else 1]:
        raise DimensionError(
            f"channel axis mismatch: input has {x.shape[1]} channels, weight expects "
            f"{w.shape[0 if cin_axis_name == 'transpose' else 1]}"
        )


def conv2d(x, w, b=None, stride=1, pad=0):
    """Cross-correlate ``x`` [N,Cin,H,W] with ``w`` [Cout,Cin,kh,kw]."""
    x, w = tensor(x), tensor(w)
    _check_common(x, w, b, stride, pad, "conv")
    cout, _, kh, kw = w.shape
    n, _, h, wd = x.shape
    if h + 2 * pad < kh:
        raise DimensionError(f"height axis too small: {h} + 2*{pad} < kernel {kh}")
    if wd + 2 * pad < kw:
        raise DimensionError(f"width axis too small: {wd} + 2*{pad} < kernel {kw}")
    if b is not None and tuple(b.shape) != (cout,):
        raise DimensionError(f"bias must have shape ({cout},), got {tuple(b.shape)}")
    ho = (h + 2 * pad - kh) // stride + 1
    wo = (wd + 2 * pad - kw) // stride + 1

    xp = np.pad(x.data, ((0, 0), (0, 0), (pad, pad), (pad, pad))) if pad else x.data
    win = _windows(xp, kh, kw, stride, ho, wo)
    out = np.tensordot(win, w.data, axes=([1, 4, 5], [1, 2, 3])).transpose(0, 3, 1, 2)
    if b is not None:
        out = out + b.data.reshape(1, -1, 1, 1)
    out = np.ascontiguousarray(out)

    def bw(g):
        gw = np.tensordot(g, win, axes=([0, 2, 3], [0, 2, 3])) if w.requires_grad else None
        gx = None
        if x.requires_grad:
            gxp = _scatter(g, w.data, stride, xp.shape[2:])
            gx = gxp[:, :, pad:pad + h, pad:pad + wd] if pad else gxp
        gb = g.sum(axis=(0, 2, 3)) if b is not None else None
        return gx, gw, gb

    parents = (x, w) if b is None else (x, w, b)
    return make_result(out, parents, bw)


def conv2d_transpose(x, w, b=None, stride=1, pad=0):
    """Transposed convolution: ``x`` [N,Cin,H,W], ``w`` [Cin,Cout,kh,kw].

    Output extent is (H-1)*stride - 2*pad + kh; the result equals the input
    gradient of :func:`conv2d` with the same weight, stride and pad.
    """
    x, w = tensor(x), tensor(w)
    _check_common(x, w, b, stride, pad, "transpose")
    _, cout, kh, kw = w.shape
    n, _, h, wd = x.shape
    full_h = (h - 1) * stride + kh
    full_w = (wd - 1) * stride + kw
    if full_h - 2 * pad < 1:
        raise DimensionError(f"height axis collapses: (H-1)*stride + kh - 2*pad = {full_h - 2 * pad}")
    if full_w - 2 * pad < 1:
        raise DimensionError(f"width axis collapses: (W-1)*stride + kw - 2*pad = {full_w - 2 * pad}")
    if b is not None and tuple(b.shape) != (cout,):
        raise DimensionError(f"bias must have shape ({cout},), got {tuple(b.shape)}")

    full = _scatter(x.data, w.data, stride, (full_h, full_w))
    out = full[:, :, pad:full_h - pad, pad:full_w - pad]
    if b is not None:
        out = out + b.data.reshape(1, -1, 1, 1)
    out = np.ascontiguousarray(out)

    def bw(g):
        gp = np.pad(g, ((0, 0), (0, 0), (pad, pad), (pad, pad))) if pad else g
        win = _windows(gp, kh, kw, stride, h, wd)
        gx = None
        if x.requires_grad:
            gx = np.tensordot(win, w.data, axes=([1, 4, 5], [1, 2, 3])).transpose(0, 3, 1, 2)
        gw = np.tensordot(x.data, win, axes=([0, 2, 3], [0, 2, 3])) if w.requires_grad else None
        gb = g.sum(axis=(0, 2, 3)) if b is not None else None
        return gx, gw, gb

    parents = (x, w) if b is None else (x, w, b)
    return make_result(out, parents, bw)
