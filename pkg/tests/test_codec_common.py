import math

import numpy as np
import pytest

from licomp.codec.bitstream import (
    CODEC_CAE, ByteReader, ByteWriter, Bitstream, pack_container, read_latent_section, read_payload,
    write_latent_section,
)
from licomp.codec.image import FeatureBlock, Image, convert_colorspace, luma, pad_to_multiple
from licomp.codec.latent import decode_latent, encode_latent, fit_basis, reconstruct_latent
from licomp.codec.pca import PcaBasis, block_samples, pca_apply, pca_fit
from licomp.codec.quant import dequantize, quantize
from licomp.codec.rangecoder import range_decode, range_encode
from licomp.errors import BitstreamError, DimensionError


def rgb(r, g, b):
    return Image(np.array([r, g, b], dtype=np.uint8).reshape(3, 1, 1), "RGB")


class TestColour:
    def test_white(self):
        ycc = convert_colorspace(rgb(255, 255, 255), "YCbCr")
        assert ycc.planes.ravel().tolist() == [255, 128, 128]

    def test_gray_fixed_point(self):
        ycc = convert_colorspace(rgb(128, 128, 128), "YCbCr")
        assert ycc.planes.ravel().tolist() == [128, 128, 128]

    def test_round_trip_cube_stride_17(self):
        levels = np.arange(0, 256, 17, dtype=np.uint8)
        r, g, b = np.meshgrid(levels, levels, levels, indexing="ij")
        img = Image(np.stack([r, g, b]).reshape(3, len(levels), -1), "RGB")
        back = convert_colorspace(convert_colorspace(img, "YCbCr"), "RGB")
        assert np.max(np.abs(back.planes.astype(int) - img.planes.astype(int))) <= 1

    def test_float_round_trip(self):
        planes = np.random.default_rng(0).uniform(0.2, 0.8, size=(3, 4, 4))
        back = convert_colorspace(convert_colorspace(Image(planes, "RGB"), "YCbCr"), "RGB")
        np.testing.assert_allclose(back.planes, planes, atol=1e-5)

    def test_same_space_rejected(self):
        with pytest.raises(ValueError):
            convert_colorspace(rgb(1, 2, 3), "RGB")

    def test_gray_to_rgb_unsupported(self):
        with pytest.raises(ValueError):
            convert_colorspace(Image(np.zeros((1, 2, 2), np.uint8), "Gray"), "RGB")

    def test_to_gray_is_luma(self):
        img = rgb(200, 10, 60)
        gray = convert_colorspace(img, "Gray")
        assert gray.planes[0, 0, 0] == round(float(luma(img)[0, 0]))

    def test_plane_count_checked(self):
        with pytest.raises(DimensionError):
            Image(np.zeros((2, 4, 4), np.uint8), "RGB")

    def test_pad_to_multiple_replicates(self):
        planes = np.arange(12, dtype=np.uint8).reshape(1, 3, 4)
        padded, pr, pb = pad_to_multiple(planes, 4)
        assert padded.shape == (1, 4, 4) and (pr, pb) == (0, 1)
        np.testing.assert_array_equal(padded[0, 3], planes[0, 2])


class TestPca:
    def test_line_samples(self):
        x = np.linspace(-3, 3, 50)
        basis = pca_fit(np.stack([x, x], axis=1))
        np.testing.assert_allclose(basis.basis[0], [1 / math.sqrt(2), 1 / math.sqrt(2)], atol=1e-9)
        assert basis.eigenvalues[1] == pytest.approx(0.0, abs=1e-9)
        np.testing.assert_allclose(basis.basis @ basis.basis.T, np.eye(2), atol=1e-12)

    def test_diagonal_covariance(self):
        rng = np.random.default_rng(0)
        z = rng.normal(size=(200000, 2))
        z = (z - z.mean(0)) / z.std(0)
        # exact diag(4, 1): whiten then decorrelate the two columns
        z[:, 1] -= z[:, 0] * (z[:, 0] @ z[:, 1]) / (z[:, 0] @ z[:, 0])
        z[:, 1] /= z[:, 1].std()
        basis = pca_fit(z * np.array([2.0, 1.0]))
        np.testing.assert_allclose(np.abs(basis.basis), np.eye(2), atol=1e-6)
        np.testing.assert_allclose(basis.eigenvalues, [4.0, 1.0], rtol=1e-3)

    def test_sign_convention(self):
        rng = np.random.default_rng(1)
        basis = pca_fit(rng.normal(size=(100, 5)) @ rng.normal(size=(5, 5)))
        lead = basis.basis[np.arange(5), np.argmax(np.abs(basis.basis), axis=1)]
        assert np.all(lead > 0)
        assert np.all(np.diff(basis.eigenvalues) <= 0)

    def test_rank_deficient_still_orthogonal(self):
        rng = np.random.default_rng(2)
        samples = rng.normal(size=(40, 2)) @ rng.normal(size=(2, 6))
        basis = pca_fit(samples)
        assert np.max(np.abs(basis.basis @ basis.basis.T - np.eye(6))) < 1e-5
        assert np.all(basis.eigenvalues >= 0)

    def test_needs_more_samples_than_dims(self):
        with pytest.raises(ValueError):
            pca_fit(np.zeros((4, 4)))

    def test_round_trip_and_isometry(self):
        rng = np.random.default_rng(3)
        fb = FeatureBlock(rng.normal(size=(8, 6, 7)) * np.arange(1, 9)[:, None, None])
        basis = pca_fit(block_samples(fb))
        fwd = pca_apply(fb, basis, "forward")
        back = pca_apply(fwd, basis, "inverse")
        np.testing.assert_allclose(back.values, fb.values, atol=1e-5)
        centred = block_samples(fb) - basis.mean
        np.testing.assert_allclose(np.linalg.norm(block_samples(fwd), axis=1),
                                   np.linalg.norm(centred, axis=1), atol=1e-5)
        v = block_samples(fwd).var(axis=0)
        assert np.argmax(v) == 0

    def test_held_out_decorrelation(self):
        rng = np.random.default_rng(4)
        mix = rng.normal(size=(6, 6))
        fit = rng.normal(size=(5000, 6)) @ mix
        held = rng.normal(size=(5000, 6)) @ mix
        basis = pca_fit(fit)
        rotated = pca_apply(FeatureBlock(held.T.reshape(6, 50, 100)), basis)
        cov = np.cov(block_samples(rotated).T)
        off = cov - np.diag(np.diag(cov))
        assert np.max(np.abs(off)) < 0.05 * basis.eigenvalues[0]

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            pca_apply(FeatureBlock(np.zeros((3, 2, 2))), PcaBasis.identity(4))

    def test_as_stored_is_float32_exact(self):
        basis = pca_fit(np.random.default_rng(5).normal(size=(30, 3))).as_stored()
        assert np.array_equal(basis.basis, basis.basis.astype(np.float32).astype(np.float64))


class TestQuantizer:
    def test_identity_grid(self):
        fb = FeatureBlock(np.arange(256, dtype=np.float64).reshape(1, 16, 16))
        codes, qp = quantize(fb, 8)
        np.testing.assert_array_equal(codes, fb.values)
        assert qp.steps[0] == 1.0 and qp.mins[0] == 0.0

    def test_five_bit_alphabet(self):
        fb = FeatureBlock(np.random.default_rng(0).normal(size=(4, 8, 8)))
        codes, qp = quantize(fb, 5)
        assert qp.levels == 32
        assert codes.min() == 0 and codes.max() == 31

    def test_endpoints(self):
        fb = FeatureBlock(np.random.default_rng(1).uniform(-3, 7, size=(3, 5, 5)))
        codes, qp = quantize(fb, 6)
        lo = fb.values.reshape(3, -1).min(1)
        hi = fb.values.reshape(3, -1).max(1)
        zero = dequantize(np.zeros_like(codes), qp).values.reshape(3, -1)[:, 0]
        top = dequantize(np.full_like(codes, 63), qp).values.reshape(3, -1)[:, 0]
        np.testing.assert_allclose(zero, lo, atol=1e-6)
        np.testing.assert_allclose(top, hi, atol=1e-6)

    @pytest.mark.parametrize("bits", [2, 5, 8, 12, 16])
    def test_error_bound(self, bits):
        fb = FeatureBlock(np.random.default_rng(bits).normal(0, 50, size=(4, 30, 30)))
        codes, qp = quantize(fb, bits)
        err = np.abs(dequantize(codes, qp).values - fb.values)
        assert np.all(err <= qp.steps.astype(np.float64)[:, None, None] / 2 + 1e-6)

    def test_constant_channel(self):
        fb = FeatureBlock(np.full((2, 3, 3), 4.25))
        codes, qp = quantize(fb, 8)
        assert np.all(codes == 0) and np.all(qp.steps > 0)
        np.testing.assert_array_equal(dequantize(codes, qp).values, fb.values)

    def test_out_of_range_code(self):
        _, qp = quantize(FeatureBlock(np.zeros((1, 2, 2))), 4)
        with pytest.raises(BitstreamError):
            dequantize(np.full((1, 2, 2), 16), qp)

    def test_bits_range(self):
        with pytest.raises(ValueError):
            quantize(FeatureBlock(np.zeros((1, 2, 2))), 1)


class TestRangeCoder:
    def test_uniform_million_round_trip(self):
        s = np.random.default_rng(0).integers(0, 256, size=10**6)
        data = range_encode(s, 256)
        np.testing.assert_array_equal(range_decode(data, s.size, 256), s)

    def test_constant_sequence_compresses(self):
        s = np.full(10**4, 7)
        data = range_encode(s, 16)
        assert len(data) < 100
        np.testing.assert_array_equal(range_decode(data, s.size, 16), s)

    def test_bernoulli_entropy(self):
        s = (np.random.default_rng(1).random(10**5) < 0.1).astype(np.int64)
        data = range_encode(s, 2)
        h = -(0.1 * math.log2(0.1) + 0.9 * math.log2(0.9))
        assert len(data) <= 1.02 * h * s.size / 8 + 64
        np.testing.assert_array_equal(range_decode(data, s.size, 2), s)

    def test_empty(self):
        assert range_encode([], 10) == b""
        assert range_decode(b"", 0, 10).size == 0

    def test_truncation_raises(self):
        s = np.random.default_rng(2).integers(0, 50, size=2000)
        data = range_encode(s, 50)
        with pytest.raises(BitstreamError):
            range_decode(data[:-1], s.size, 50)

    def test_wrong_alphabet_stays_in_bounds(self):
        s = np.random.default_rng(3).integers(0, 300, size=5000)
        data = range_encode(s, 300)
        try:
            out = range_decode(data, s.size, 40)
        except BitstreamError:
            return
        assert out.min() >= 0 and out.max() < 40

    def test_largest_alphabet(self):
        s = np.random.default_rng(4).integers(0, 1 << 16, size=3000)
        np.testing.assert_array_equal(range_decode(range_encode(s, 1 << 16), s.size, 1 << 16), s)

    def test_symbol_out_of_range(self):
        with pytest.raises(ValueError):
            range_encode([3], 3)


class TestContainer:
    def test_pack_and_read(self):
        bs = pack_container(CODEC_CAE, 640, 480, b"\x01\x02", b"payload")
        assert bs.data[:4] == b"LIC1"
        assert (bs.codec_id, bs.width, bs.height) == (0, 640, 480)
        r = bs.reader(CODEC_CAE)
        assert r.get_bytes(2) == b"\x01\x02"
        assert read_payload(r) == b"payload"
        assert bs.bpp() == 8 * len(bs.data) / (640 * 480)

    def test_wrong_codec_id(self):
        bs = pack_container(CODEC_CAE, 4, 4, b"", b"")
        with pytest.raises(BitstreamError):
            bs.reader(1)

    def test_bad_magic(self):
        with pytest.raises(BitstreamError):
            Bitstream(b"XXXX" + bytes(20))

    def test_trailing_bytes_rejected(self):
        bs = pack_container(CODEC_CAE, 4, 4, b"", b"ab")
        with pytest.raises(BitstreamError):
            read_payload(Bitstream(bs.data + b"z").reader(CODEC_CAE))

    def test_header_overflow(self):
        with pytest.raises(BitstreamError):
            ByteWriter().put("H", 70000)

    def test_latent_section_round_trip(self):
        fb = FeatureBlock(np.random.default_rng(0).normal(size=(5, 4, 4)))
        basis = fit_basis(fb)
        code = encode_latent(fb, 7, basis)
        w = write_latent_section(ByteWriter(), code.qp, code.basis, code.symbol_count)
        qp, b2, count = read_latent_section(ByteReader(w.getvalue()), with_pca=True)
        assert count == 80 and qp.bits == 7
        np.testing.assert_array_equal(qp.mins, code.qp.mins)
        np.testing.assert_array_equal(b2.basis, basis.basis)
        dec = decode_latent(code.data, qp, b2, (5, 4, 4))
        np.testing.assert_array_equal(dec.values, reconstruct_latent(code.codes, code.qp, basis).values)

    def test_latent_pipeline_deterministic(self):
        fb = FeatureBlock(np.random.default_rng(1).normal(size=(6, 5, 5)))
        a = encode_latent(fb, 8, fit_basis(fb))
        b = encode_latent(fb, 8, fit_basis(fb))
        assert a.data == b.data
