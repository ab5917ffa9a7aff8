import math
import os
import tempfile

import numpy as np
import pytest

from licomp.codec.bitstream import Bitstream
from licomp.codec.image import Image, luma
from licomp.errors import BitstreamError, DimensionError, ExternalToolError, NumericError
from licomp.metrics import psnr
from licomp.sr import (
    AdaptiveConfig, BaseCodecParams, SrcnnModel, adaptive_route, base_codec, fixed_route, pre_psnr, resample,
    sr_decode, sr_encode, srcnn_forward, srcnn_train_step,
)
from licomp.sr import bpg
from licomp.sr.codec import ROUTE_LANCZOS, ROUTE_SRCNN, decide, read_sr_header
from licomp.sr.dct import dct_decode, dct_encode
from licomp.sr.srcnn import make_sr_pairs
from licomp.synth import synthetic_corpus, synthetic_image
from licomp.tensor import Adam
from licomp.training import train_srcnn


def ramp(h=48, w=64):
    y, x = np.mgrid[0:h, 0:w]
    return Image(np.stack([20 + 2.5 * x, 30 + 3.0 * y, 100 + x + y]).astype(np.uint8), "RGB")


class TestResample:
    @pytest.mark.parametrize("kernel", ["lanczos3", "bicubic", "box"])
    def test_unit_scale_is_identity(self, kernel):
        img = synthetic_image(0, (20, 30))
        np.testing.assert_array_equal(resample(img, 1.0, kernel).planes, img.planes)

    @pytest.mark.parametrize("kernel", ["lanczos3", "bicubic", "box"])
    @pytest.mark.parametrize("scale", [0.3, 0.5, 0.7, 2.0, 3.0])
    def test_constant_preserved(self, kernel, scale):
        img = Image(np.full((3, 21, 17), 77, np.uint8), "RGB")
        out = resample(img, scale, kernel)
        assert np.all(out.planes == 77)

    def test_smooth_round_trip(self):
        y, x = np.mgrid[0:64, 0:64]
        img = Image((60 + 1.5 * x + 0.8 * y)[None].astype(np.uint8), "Gray")
        back = resample(resample(img, 2.0), 0.5)
        assert psnr(img, back) >= 40.0

    def test_dims(self):
        out = resample(synthetic_image(1, (50, 60)), 0.7)
        assert (out.width, out.height) == (42, 35)
        tiny = resample(Image(np.zeros((1, 2, 2), np.uint8), "Gray"), 0.1)
        assert (tiny.width, tiny.height) == (1, 1)

    def test_float_input_stays_float(self):
        img = Image(np.random.default_rng(0).uniform(0, 1, size=(1, 10, 10)), "Gray")
        out = resample(img, 0.5)
        assert out.planes.dtype.kind == "f" and out.planes.min() >= 0 and out.planes.max() <= 1


class TestSrcnn:
    @pytest.mark.parametrize("shape", [(17, 17), (20, 33), (40, 24)])
    def test_identity_model(self, shape):
        plane = np.random.default_rng(0).uniform(0, 1, size=shape)
        out = srcnn_forward(plane, SrcnnModel(init="identity"))
        assert out.shape == shape
        assert np.max(np.abs(out - plane)) < 1e-5

    def test_dims_preserved_random_init(self):
        out = srcnn_forward(np.full((19, 23), 0.5), SrcnnModel(init="he", seed=1))
        assert out.shape == (19, 23) and out.min() >= 0 and out.max() <= 1

    def test_multichannel_rejected(self):
        with pytest.raises(DimensionError):
            srcnn_forward(np.zeros((3, 20, 20)), SrcnnModel())

    def test_identity_zero_loss(self):
        x = np.random.default_rng(1).uniform(0, 1, size=(2, 1, 18, 18)).astype(np.float32)
        m = SrcnnModel(init="identity")
        opt = Adam(m.params(), lr=1e-4)
        assert srcnn_train_step(m, x, x, opt) < 1e-10
        assert max(float(np.max(np.abs(p.grad))) for p in m.params()) < 1e-4

    def test_deterministic(self):
        images = synthetic_corpus(3, seed=2, size=(48, 48))
        inputs, targets = make_sr_pairs(images, 18, 8, seed=0)
        runs = []
        for _ in range(2):
            m = SrcnnModel(init="he", seed=3)
            opt = Adam(m.params(), lr=1e-3)
            runs.append([srcnn_train_step(m, inputs, targets, opt) for _ in range(3)])
        assert runs[0] == runs[1]

    def test_non_finite(self):
        m = SrcnnModel()
        x = np.full((1, 1, 18, 18), np.nan, np.float32)
        with pytest.raises(NumericError):
            srcnn_train_step(m, x, x, Adam(m.params()))

    @pytest.mark.slow
    def test_training_drops_mse_tenfold(self):
        images = synthetic_corpus(20, seed=3, size=(96, 96))
        losses = []
        train_srcnn(images, 2000, init="he", lr=1e-3, seed=0, log=lambda s, l, a="": losses.append(l))
        assert losses[0] / np.mean(losses[-50:]) >= 10


class TestDct:
    def test_quality_100(self):
        img = synthetic_image(4, (64, 96), texture=0.1)
        out = dct_decode(dct_encode(img, 100))
        assert psnr(img, out) >= 45.0

    def test_quality_ordering(self):
        img = synthetic_image(5, (64, 96), texture=0.5)
        lo, hi = dct_encode(img, 10), dct_encode(img, 90)
        assert len(lo) < len(hi)
        assert psnr(img, dct_decode(lo)) < psnr(img, dct_decode(hi))

    def test_odd_dims_and_gray(self):
        gray = Image(luma(synthetic_image(6, (37, 29))).round().astype(np.uint8)[None], "Gray")
        out = dct_decode(dct_encode(gray, 75))
        assert out.colorspace == "Gray" and (out.height, out.width) == (37, 29)

    def test_truncated(self):
        data = dct_encode(synthetic_image(7, (32, 32), texture=0.8), 90)
        with pytest.raises(BitstreamError):
            dct_decode(data[: len(data) // 2])


class TestBpg:
    def test_missing_binary_is_structured_and_clean(self, tmp_path, monkeypatch):
        monkeypatch.setenv("LICOMP_BPG_PATH", str(tmp_path / "nowhere"))
        monkeypatch.setenv("PATH", str(tmp_path / "empty"))
        scratch = tmp_path / "scratch"
        scratch.mkdir()
        monkeypatch.setattr(tempfile, "tempdir", str(scratch))
        assert not bpg.bpg_available()
        with pytest.raises(ExternalToolError):
            base_codec(synthetic_image(8, (40, 40)), BaseCodecParams("bpg", 30), "encode")
        assert os.listdir(scratch) == []

    def test_qp_range(self):
        with pytest.raises(ValueError):
            BaseCodecParams("bpg", 52)
        with pytest.raises(ValueError):
            BaseCodecParams("builtin", 0)


class TestRouting:
    img = synthetic_image(9, (60, 80))

    def test_above_threshold_takes_srcnn(self):
        d = decide(35.0, self.img, AdaptiveConfig(threshold=33.0))
        assert d.route == ROUTE_SRCNN and d.dims == (40, 30)

    def test_below_threshold_takes_lanczos(self):
        d = decide(30.0, self.img, AdaptiveConfig(threshold=33.0))
        assert d.route == ROUTE_LANCZOS and d.dims == (56, 42)

    def test_equal_is_not_above(self):
        assert decide(33.0, self.img, AdaptiveConfig()).route == ROUTE_LANCZOS

    def test_infinite_threshold(self):
        for seed in range(3):
            d = adaptive_route(synthetic_image(seed, (40, 40), texture=0.0), SrcnnModel(), AdaptiveConfig(math.inf))
            assert d.route == ROUTE_LANCZOS

    def test_rule_matches_measurement(self):
        model = SrcnnModel()
        for seed, tex in enumerate([0.0, 0.2, 0.6, 1.0]):
            img = synthetic_image(seed, (48, 48), texture=tex)
            d = adaptive_route(img, model)
            assert d.pre_psnr == pre_psnr(img, model)
            assert (d.route == ROUTE_SRCNN) == (d.pre_psnr > 33.0)

    def test_too_small(self):
        with pytest.raises(DimensionError):
            adaptive_route(synthetic_image(0, (33, 40)), SrcnnModel())

    def test_config_validation(self):
        with pytest.raises(ValueError):
            AdaptiveConfig(sr_scale=0.8, fallback_scale=0.7)
        with pytest.raises(ValueError):
            AdaptiveConfig(threshold=math.nan)


class TestSrCodec:
    model = SrcnnModel()

    @pytest.mark.parametrize("tex", [0.0, 1.0])
    def test_header_matches_decision(self, tex):
        img = synthetic_image(10, (64, 64), texture=tex)
        d = adaptive_route(img, self.model)
        route, size, base, _ = read_sr_header(sr_encode(img, self.model))
        assert route == d.route and size == (64, 64) and base == BaseCodecParams()

    @pytest.mark.parametrize("route", [ROUTE_SRCNN, ROUTE_LANCZOS])
    def test_output_dims(self, route):
        img = synthetic_image(11, (45, 71))
        bs = sr_encode(img, self.model, decision=fixed_route(img, route, 0.5 if route == ROUTE_SRCNN else 0.7))
        out = sr_decode(Bitstream(bs.data), self.model)
        assert (out.height, out.width) == (45, 71)

    def test_half_scale_payload_smaller(self):
        img = synthetic_image(12, (96, 96), texture=0.6)
        bs = sr_encode(img, self.model, decision=fixed_route(img, ROUTE_SRCNN, 0.5))
        assert len(read_sr_header(bs)[3]) < len(base_codec(img, BaseCodecParams(), "encode"))

    def test_lanczos_route_needs_no_model(self):
        img = synthetic_image(13, (40, 40))
        bs = sr_encode(img, self.model, decision=fixed_route(img, ROUTE_LANCZOS, 0.7))
        assert (sr_decode(bs).width, sr_decode(bs).height) == (40, 40)

    def test_srcnn_route_needs_model(self):
        img = synthetic_image(14, (40, 40))
        bs = sr_encode(img, self.model, decision=fixed_route(img, ROUTE_SRCNN, 0.5))
        with pytest.raises(ValueError):
            sr_decode(bs)

    def test_deterministic(self):
        img = synthetic_image(15, (48, 48))
        a, b = sr_encode(img, self.model), sr_encode(img, self.model)
        assert a.data == b.data
        np.testing.assert_array_equal(sr_decode(a, self.model).planes, sr_decode(b, self.model).planes)

    def test_invalid_route_flag(self):
        data = bytearray(sr_encode(synthetic_image(16, (40, 40)), self.model).data)
        data[13] = 7
        with pytest.raises(BitstreamError):
            sr_decode(Bitstream(bytes(data)), self.model)
