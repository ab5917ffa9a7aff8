import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from licomp.codec.bitstream import pack_container, read_payload
from licomp.codec.image import FeatureBlock, Image, convert_colorspace
from licomp.codec.quant import dequantize, quantize
from licomp.codec.rangecoder import range_decode, range_encode
from licomp.metrics import psnr
from licomp.sr.resample import resample

SETTINGS = settings(max_examples=60, deadline=None)


@SETTINGS
@given(st.integers(2, 5000).flatmap(
    lambda a: st.tuples(st.just(a), st.lists(st.integers(0, a - 1), max_size=400))))
def test_range_coder_round_trip(case):
    alphabet, symbols = case
    data = range_encode(symbols, alphabet)
    np.testing.assert_array_equal(range_decode(data, len(symbols), alphabet), symbols)


@SETTINGS
@given(arrays(np.float64, st.tuples(st.integers(1, 4), st.integers(1, 6), st.integers(1, 6)),
              elements=st.floats(-1e4, 1e4)),
       st.integers(2, 16))
def test_quantizer_bound(values, bits):
    codes, qp = quantize(FeatureBlock(values), bits)
    assert codes.min() >= 0 and codes.max() < 1 << bits
    err = np.abs(dequantize(codes, qp).values - values)
    assert np.all(err <= qp.steps.astype(np.float64)[:, None, None] / 2 + 1e-6)


@SETTINGS
@given(st.tuples(st.integers(0, 255), st.integers(0, 255), st.integers(0, 255)))
def test_colour_round_trip_within_one(rgb):
    img = Image(np.array(rgb, np.uint8).reshape(3, 1, 1), "RGB")
    back = convert_colorspace(convert_colorspace(img, "YCbCr"), "RGB")
    assert np.max(np.abs(back.planes.astype(int) - img.planes.astype(int))) <= 1


@SETTINGS
@given(st.integers(1, 40), st.integers(1, 40), st.integers(0, 255),
       st.sampled_from([0.3, 0.5, 0.7, 1.5, 2.0]), st.sampled_from(["lanczos3", "bicubic", "box"]))
def test_resample_keeps_constants(h, w, value, scale, kernel):
    img = Image(np.full((1, h, w), value, np.uint8), "Gray")
    assert np.all(resample(img, scale, kernel).planes == value)


@SETTINGS
@given(arrays(np.uint8, (2, 1, 6, 7)))
def test_psnr_symmetric(pair):
    a, b = Image(pair[0], "Gray"), Image(pair[1], "Gray")
    assert psnr(a, b) == psnr(b, a)


@SETTINGS
@given(st.integers(0, 2), st.integers(1, 2 ** 32 - 1), st.integers(1, 2 ** 32 - 1), st.binary(max_size=40),
       st.binary(max_size=200))
def test_container_round_trip(codec, width, height, header, payload):
    bs = pack_container(codec, width, height, header, payload)
    r = bs.reader(codec)
    assert (bs.width, bs.height) == (width, height)
    assert r.get_bytes(len(header)) == header
    assert read_payload(r) == payload
