"""Image file I/O: binary PPM (P6) / PGM (P5) natively, PNG through Pillow."""

from pathlib import Path

import numpy as np

from licomp.codec.image import Image
from licomp.errors import ImageFormatError

_NETPBM = {b"P6": ("RGB", 3), b"P5": ("Gray", 1)}


def _header_tokens(data, count):
    """Read ``count`` whitespace-separated header tokens, skipping # comments."""
    tokens = []
    pos = 0
    n = len(data)
    while len(tokens) < count:
        while pos < n and (data[pos:pos + 1].isspace() or data[pos:pos + 1] == b"#"):
            if data[pos:pos + 1] == b"#":
                while pos < n and data[pos:pos + 1] not in (b"\n", b"\r"):
                    pos += 1
            else:
                pos += 1
        if pos >= n:
            raise ImageFormatError(f"truncated netpbm header at byte {pos}")
        start = pos
        while pos < n and not data[pos:pos + 1].isspace() and data[pos:pos + 1] != b"#":
            pos += 1
        tokens.append((data[start:pos], start))
    if pos >= n or not data[pos:pos + 1].isspace():
        raise ImageFormatError(f"missing whitespace after netpbm header at byte {pos}")
    return tokens, pos + 1


def decode_netpbm(data):
    if data[:2] not in _NETPBM:
        raise ImageFormatError(f"unsupported magic {data[:2]!r} at byte 0 (expected P5 or P6)")
    colorspace, planes = _NETPBM[data[:2]]
    (_, (w, w_at), (h, h_at), (mx, mx_at)), offset = _header_tokens(data, 4)
    values = []
    for tok, at, what in ((w, w_at, "width"), (h, h_at, "height"), (mx, mx_at, "maxval")):
        if not tok.isdigit() or int(tok) == 0:
            raise ImageFormatError(f"invalid {what} {tok!r} at byte {at}")
        values.append(int(tok))
    width, height, maxval = values
    if maxval != 255:
        raise ImageFormatError(f"only 8-bit netpbm (maxval 255) is supported, got {maxval} at byte {mx_at}")
    need = width * height * planes
    if len(data) - offset < need:
        raise ImageFormatError(
            f"pixel data truncated at byte {len(data)}: expected {need} bytes after the header "
            f"(byte {offset}), found {len(data) - offset}"
        )
    pix = np.frombuffer(data, dtype=np.uint8, count=need, offset=offset)
    return Image(pix.reshape(height, width, planes).transpose(2, 0, 1).copy(), colorspace)


def encode_netpbm(img):
    img = img.to_u8()
    if img.colorspace == "YCbCr":
        raise ImageFormatError("convert YCbCr images to RGB before saving")
    magic = b"P6" if img.colorspace == "RGB" else b"P5"
    header = b"%s\n%d %d\n255\n" % (magic, img.width, img.height)
    return header + np.ascontiguousarray(img.planes.transpose(1, 2, 0)).tobytes()


def load_image(path):
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise ImageFormatError(f"cannot read {path}: {exc.strerror}") from None
    if data[:2] in _NETPBM:
        return decode_netpbm(data)
    if data[:8] == b"\x89PNG\r\n\x1a\n":
        return _load_png(path)
    raise ImageFormatError(f"{path}: unrecognized image signature {data[:8]!r} at byte 0")


def _load_png(path):
    from PIL import Image as PilImage

    try:
        with PilImage.open(path) as pil:
            mode = pil.mode
            if mode in ("L", "I;16", "I", "1"):
                arr = np.asarray(pil.convert("L"))[None]
                return Image(arr.copy(), "Gray")
            arr = np.asarray(pil.convert("RGB")).transpose(2, 0, 1)
            return Image(arr.copy(), "RGB")
    except OSError as exc:
        raise ImageFormatError(f"{path}: {exc}") from None


def save_image(img, path):
    """Write by extension: .ppm/.pgm (netpbm) or .png."""
    path = Path(path)
    ext = path.suffix.lower()
    img = img.to_u8()
    if ext in (".ppm", ".pgm", ".pnm"):
        data = encode_netpbm(img)
        path.write_bytes(data)
    elif ext == ".png":
        from PIL import Image as PilImage

        if img.colorspace == "YCbCr":
            raise ImageFormatError("convert YCbCr images to RGB before saving")
        arr = img.planes[0] if img.colorspace == "Gray" else img.planes.transpose(1, 2, 0)
        PilImage.fromarray(np.ascontiguousarray(arr)).save(path)
    else:
        raise ImageFormatError(f"unsupported output extension {ext!r} (use .ppm, .pgm or .png)")
