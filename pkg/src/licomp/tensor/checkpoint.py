"""``.licw`` checkpoint container.

Layout (little-endian)::

    b"LICW" | version u8 | count u32 |
    count x ( name_len u16 | name utf-8 | rank u8 | extents u32*rank | values f32* )
"""

import struct

import numpy as np

from licomp.errors import BitstreamError

MAGIC = b"LICW"
VERSION = 1


def dump_checkpoint(state):
    """Serialize a name -> array mapping (insertion order kept)."""
    out = bytearray(MAGIC)
    out += struct.pack("<BI", VERSION, len(state))
    for name, arr in state.items():
        arr = np.asarray(arr, dtype="<f4")
        raw = name.encode("utf-8")
        out += struct.pack("<H", len(raw)) + raw
        out += struct.pack("<B", arr.ndim)
        out += struct.pack(f"<{arr.ndim}I", *arr.shape)
        out += arr.tobytes()
    return bytes(out)


def parse_checkpoint(buf):
    buf = memoryview(buf)
    if bytes(buf[:4]) != MAGIC:
        raise BitstreamError("not a LICW checkpoint (bad magic)")
    try:
        version, count = struct.unpack_from("<BI", buf, 4)
        if version != VERSION:
            raise BitstreamError(f"unsupported checkpoint version {version}")
        pos = 9
        state = {}
        for _ in range(count):
            (nlen,) = struct.unpack_from("<H", buf, pos)
            pos += 2
            name = bytes(buf[pos:pos + nlen]).decode("utf-8")
            pos += nlen
            (rank,) = struct.unpack_from("<B", buf, pos)
            pos += 1
            shape = struct.unpack_from(f"<{rank}I", buf, pos)
            pos += 4 * rank
            n = int(np.prod(shape)) if rank else 1
            if pos + 4 * n > len(buf):
                raise BitstreamError(f"checkpoint truncated inside entry {name!r}")
            state[name] = np.frombuffer(buf, dtype="<f4", count=n, offset=pos).reshape(shape).copy()
            pos += 4 * n
    except struct.error as exc:
        raise BitstreamError(f"checkpoint truncated: {exc}") from None
    return state


def save_checkpoint(path, state):
    with open(path, "wb") as fh:
        fh.write(dump_checkpoint(state))


def load_checkpoint(path):
    with open(path, "rb") as fh:
        return parse_checkpoint(fh.read())
