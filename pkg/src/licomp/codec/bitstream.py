"""Self-describing ``.lic`` container.

Little-endian layout::

    b"LIC1" | codec_id u8 | width u32 | height u32 | <codec header> | payload_len u32 | payload

The CAE and GAN codecs share a *latent section* (quantizer + optional PCA)::

    bits u8 | channels u16 | channels x (min f32, step f32)
    [ mean f32 x C | basis f32 x C*C ]          (only when PCA is present)
    symbol_count u32
"""

import struct
from dataclasses import dataclass

import numpy as np

from licomp.codec.pca import PcaBasis
from licomp.codec.quant import QuantParams
from licomp.errors import BitstreamError

MAGIC = b"LIC1"
CODEC_CAE, CODEC_GAN, CODEC_SR = 0, 1, 2
CODEC_NAMES = {CODEC_CAE: "cae", CODEC_GAN: "gan", CODEC_SR: "sr"}


class ByteWriter:
    def __init__(self):
        self.buf = bytearray()

    def put(self, fmt, *values):
        try:
            self.buf += struct.pack("<" + fmt, *values)
        except struct.error as exc:
            raise BitstreamError(f"value does not fit header field ({fmt}): {values}") from None
        return self

    def put_array(self, arr, dtype="<f4"):
        self.buf += np.ascontiguousarray(arr, dtype=dtype).tobytes()
        return self

    def put_bytes(self, data):
        self.buf += data
        return self

    def getvalue(self):
        return bytes(self.buf)


class ByteReader:
    def __init__(self, data, pos=0):
        self.data = memoryview(data)
        self.pos = pos

    def take(self, n):
        if self.pos + n > len(self.data):
            raise BitstreamError(
                f"stream truncated at byte {self.pos}: need {n} more bytes, {len(self.data) - self.pos} left"
            )
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def get(self, fmt):
        size = struct.calcsize("<" + fmt)
        vals = struct.unpack("<" + fmt, self.take(size))
        return vals[0] if len(vals) == 1 else vals

    def get_array(self, count, dtype="<f4"):
        dt = np.dtype(dtype)
        return np.frombuffer(self.take(count * dt.itemsize), dtype=dt).astype(np.float64)

    def get_bytes(self, n):
        return bytes(self.take(n))

    def remaining(self):
        return len(self.data) - self.pos


@dataclass(frozen=True)
class Bitstream:
    """An encoded image; every byte counts toward the rate."""

    data: bytes

    def __post_init__(self):
        if len(self.data) < 13 or self.data[:4] != MAGIC:
            raise BitstreamError("not a LIC1 stream (bad magic or too short)")

    @property
    def codec_id(self):
        return self.data[4]

    @property
    def width(self):
        return struct.unpack_from("<I", self.data, 5)[0]

    @property
    def height(self):
        return struct.unpack_from("<I", self.data, 9)[0]

    @property
    def num_bits(self):
        return 8 * len(self.data)

    def bpp(self, pixels=None):
        pixels = self.width * self.height if pixels is None else pixels
        return self.num_bits / pixels

    def reader(self, codec_id):
        """Reader positioned at the codec header, after checking the codec id."""
        if self.codec_id != codec_id:
            raise BitstreamError(
                f"stream codec id {self.codec_id} ({CODEC_NAMES.get(self.codec_id, '?')}), "
                f"expected {codec_id} ({CODEC_NAMES[codec_id]})"
            )
        return ByteReader(self.data, 13)


def pack_container(codec_id, width, height, header, payload):
    w = ByteWriter().put("4sBII", MAGIC, codec_id, width, height)
    w.put_bytes(header).put("I", len(payload)).put_bytes(payload)
    return Bitstream(w.getvalue())


def read_payload(reader):
    n = reader.get("I")
    payload = reader.get_bytes(n)
    if reader.remaining():
        raise BitstreamError(f"{reader.remaining()} trailing bytes after payload")
    return payload


def write_latent_section(w, qp, basis, symbol_count):
    c = qp.mins.shape[0]
    w.put("BH", qp.bits, c)
    w.put_array(np.stack([qp.mins, qp.steps], axis=1))
    if basis is not None:
        w.put_array(basis.mean).put_array(basis.basis)
    w.put("I", symbol_count)
    return w


def read_latent_section(r, with_pca):
    bits, c = r.get("BH")
    if not 2 <= bits <= 16:
        raise BitstreamError(f"invalid quantizer bit depth {bits}")
    ms = r.get_array(2 * c).reshape(c, 2)
    qp = QuantParams(bits, ms[:, 0].astype(np.float32), ms[:, 1].astype(np.float32))
    basis = None
    if with_pca:
        mean = r.get_array(c)
        mat = r.get_array(c * c).reshape(c, c)
        basis = PcaBasis(mean, mat, np.zeros(c))
    count = r.get("I")
    return qp, basis, count
