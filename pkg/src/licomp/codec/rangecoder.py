"""32-bit range coder with an adaptive order-0 frequency model.

The coder is the carry-propagating variant (33-bit ``low`` register, a cached
byte plus a run of pending 0xFF bytes).  The model keeps one count per
symbol, all starting at 1, incremented by :data:`INCREMENT` per coded
symbol and halved once the total exceeds the model limit (2**15, or
4 * alphabet for very large alphabets so the model can still adapt).
Cumulative counts live in a Fenwick tree, so coding is O(log alphabet).

Decoder and encoder models evolve identically; a mismatched model (wrong
alphabet size, wrong stream) is not detectable and yields garbage symbols,
but every table access stays in bounds.

The low-level ``_`` kernels are numba-compiled and reused by the block DCT
codec, which drives several models and raw-bit fields through one coder.
"""

import numpy as np
from numba import njit

from licomp.errors import BitstreamError

INCREMENT = 32
BASE_LIMIT = 1 << 15
MAX_ALPHABET = 1 << 16
_TOP = 1 << 24
_MASK32 = 0xFFFFFFFF


def model_limit(alphabet):
    return max(BASE_LIMIT, 4 * alphabet)


# -- adaptive model ---------------------------------------------------------
# freq[s]: count of symbol s; tree: 1-based Fenwick array over freq;
# info = [total, alphabet, limit, top_power_of_two]


@njit(cache=True)
def _model_reset(freq, tree, info):
    n = info[1]
    for i in range(n):
        freq[i] = 1
    for i in range(n + 1):
        tree[i] = 0
    for i in range(1, n + 1):
        tree[i] += 1
        j = i + (i & -i)
        if j <= n:
            tree[j] += tree[i]
    info[0] = n


@njit(cache=True)
def _model_rebuild(freq, tree, info):
    n = info[1]
    total = 0
    for i in range(n + 1):
        tree[i] = 0
    for i in range(n):
        total += freq[i]
        tree[i + 1] += freq[i]
        j = (i + 1) + ((i + 1) & -(i + 1))
        if j <= n:
            tree[j] += tree[i + 1]
    info[0] = total


@njit(cache=True)
def _model_cum(tree, sym):
    s = 0
    i = sym
    while i > 0:
        s += tree[i]
        i -= i & -i
    return s


@njit(cache=True)
def _model_find(tree, info, target):
    n = info[1]
    pos = 0
    step = info[3]
    while step > 0:
        nxt = pos + step
        if nxt <= n and tree[nxt] <= target:
            pos = nxt
            target -= tree[nxt]
        step >>= 1
    return pos


@njit(cache=True)
def _model_update(freq, tree, info, sym):
    n = info[1]
    freq[sym] += INCREMENT
    i = sym + 1
    while i <= n:
        tree[i] += INCREMENT
        i += i & -i
    info[0] += INCREMENT
    if info[0] > info[2]:
        for k in range(n):
            freq[k] = (freq[k] + 1) >> 1
        _model_rebuild(freq, tree, info)


def new_model(alphabet):
    """Fresh model arrays ``(freq, tree, info)`` for ``alphabet`` symbols."""
    if not 1 <= alphabet <= MAX_ALPHABET:
        raise ValueError(f"alphabet size must be in [1, {MAX_ALPHABET}], got {alphabet}")
    freq = np.empty(alphabet, dtype=np.int64)
    tree = np.empty(alphabet + 1, dtype=np.int64)
    top = 1
    while top * 2 <= alphabet:
        top *= 2
    info = np.array([0, alphabet, model_limit(alphabet), top], dtype=np.int64)
    _model_reset(freq, tree, info)
    return freq, tree, info


# -- coder state ------------------------------------------------------------
# encoder st = [low, range, cache, cache_size, out_pos]
# decoder st = [code, range, in_pos]


@njit(cache=True)
def _enc_init(st):
    st[0] = 0
    st[1] = _MASK32
    st[2] = 0
    st[3] = 1
    st[4] = 0


@njit(cache=True)
def _shift_low(st, out):
    low = st[0]
    if low < 0xFF000000 or low > _MASK32:
        carry = low >> 32
        temp = st[2]
        while True:
            out[st[4]] = (temp + carry) & 0xFF
            st[4] += 1
            temp = 0xFF
            st[3] -= 1
            if st[3] == 0:
                break
        st[2] = (low >> 24) & 0xFF
    st[3] += 1
    st[0] = (low & 0x00FFFFFF) << 8


@njit(cache=True)
def _enc_put(st, out, cum, freq, total):
    r = st[1] // total
    st[0] += r * cum
    st[1] = r * freq
    while st[1] < _TOP:
        st[1] <<= 8
        _shift_low(st, out)


@njit(cache=True)
def _enc_symbol(st, out, freq, tree, info, sym):
    _enc_put(st, out, _model_cum(tree, sym), freq[sym], info[0])
    _model_update(freq, tree, info, sym)


@njit(cache=True)
def _enc_bits(st, out, value, nbits):
    # raw fields, at most 16 bits per coder call
    while nbits > 16:
        nbits -= 16
        _enc_put(st, out, (value >> nbits) & 0xFFFF, 1, 1 << 16)
    if nbits > 0:
        _enc_put(st, out, value & ((1 << nbits) - 1), 1, 1 << nbits)


@njit(cache=True)
def _enc_finish(st, out):
    for _ in range(5):
        _shift_low(st, out)
    return st[4]


@njit(cache=True)
def _next_byte(st, data):
    pos = st[2]
    if pos >= data.shape[0]:
        return -1
    st[2] = pos + 1
    return data[pos]


@njit(cache=True)
def _dec_init(st, data):
    # the encoder's first byte is always 0 and is not stored
    st[0] = 0
    st[1] = _MASK32
    st[2] = 0
    for _ in range(4):
        b = _next_byte(st, data)
        if b < 0:
            return False
        st[0] = (st[0] << 8) | b
    return True


@njit(cache=True)
def _dec_target(st, total):
    r = st[1] // total
    v = st[0] // r
    if v >= total:
        v = total - 1
    return v


@njit(cache=True)
def _dec_consume(st, data, cum, freq, total):
    r = st[1] // total
    st[0] -= r * cum
    st[1] = r * freq
    while st[1] < _TOP:
        b = _next_byte(st, data)
        if b < 0:
            return False
        st[0] = ((st[0] << 8) | b) & _MASK32
        st[1] <<= 8
    return True


@njit(cache=True)
def _dec_symbol(st, data, freq, tree, info):
    """Returns the decoded symbol, or -1 when the input runs out."""
    total = info[0]
    sym = _model_find(tree, info, _dec_target(st, total))
    ok = _dec_consume(st, data, _model_cum(tree, sym), freq[sym], total)
    _model_update(freq, tree, info, sym)
    return sym if ok else -1


@njit(cache=True)
def _dec_bits(st, data, nbits):
    value = 0
    while nbits > 0:
        k = 16 if nbits > 16 else nbits
        nbits -= k
        v = _dec_target(st, 1 << k)
        if not _dec_consume(st, data, v, 1, 1 << k):
            return -1
        value = (value << k) | v
    return value


@njit(cache=True)
def _encode_array(symbols, freq, tree, info, out):
    st = np.zeros(5, dtype=np.int64)
    _enc_init(st)
    for i in range(symbols.shape[0]):
        _enc_symbol(st, out, freq, tree, info, symbols[i])
    return _enc_finish(st, out)


@njit(cache=True)
def _decode_array(data, count, freq, tree, info, out):
    st = np.zeros(3, dtype=np.int64)
    if count == 0:
        return True
    if not _dec_init(st, data):
        return False
    for i in range(count):
        s = _dec_symbol(st, data, freq, tree, info)
        if s < 0:
            return False
        out[i] = s
    return True


def encoded_capacity(n_items, max_bits=18):
    """Safe output size bound for ``n_items`` coder calls of at most ``max_bits`` each."""
    return (n_items * (max_bits + 8)) // 8 + 16


def range_encode(symbols, alphabet_size):
    """Entropy-code integer ``symbols`` (each < ``alphabet_size``) into bytes.

    The symbol count is not stored; the container carries it.
    """
    symbols = np.ascontiguousarray(symbols, dtype=np.int64).reshape(-1)
    if symbols.size and (symbols.min() < 0 or symbols.max() >= alphabet_size):
        raise ValueError(f"symbols must lie in [0, {alphabet_size})")
    if symbols.size == 0:
        return b""
    freq, tree, info = new_model(alphabet_size)
    out = np.empty(encoded_capacity(symbols.size), dtype=np.uint8)
    n = _encode_array(symbols, freq, tree, info, out)
    return out[1:n].tobytes()


def range_decode(data, symbol_count, alphabet_size):
    """Inverse of :func:`range_encode`; raises :class:`BitstreamError` on truncated input."""
    out = np.empty(symbol_count, dtype=np.int64)
    if symbol_count == 0:
        return out
    freq, tree, info = new_model(alphabet_size)
    buf = np.frombuffer(bytes(data), dtype=np.uint8)
    if not _decode_array(buf, symbol_count, freq, tree, info, out):
        raise BitstreamError(
            f"range-coded payload truncated ({len(buf)} bytes for {symbol_count} symbols)"
        )
    return out
