import csv

import numpy as np
import pytest

from licomp.cae import CaeConfig, CaeModel
from licomp.cli import EXIT_IO, EXIT_OK, EXIT_USAGE, run_command
from licomp.codec.image import Image
from licomp.data import Corpus, crop_origins, sample_patches, split_of
from licomp.errors import ImageFormatError
from licomp.io import decode_netpbm, encode_netpbm, load_image, save_image
from licomp.synth import synthetic_image
from licomp.tensor import save_checkpoint
from licomp.training import LossLog


class TestIo:
    def test_white_pixel(self):
        img = decode_netpbm(b"P6\n1 1\n255\n\xff\xff\xff")
        assert (img.width, img.height, img.colorspace) == (1, 1, "RGB")
        assert img.planes.ravel().tolist() == [255, 255, 255]

    def test_comments_and_gray(self):
        img = decode_netpbm(b"P5 # comment\n2 1\n255\n\x01\x02")
        assert img.colorspace == "Gray" and img.planes.ravel().tolist() == [1, 2]

    def test_truncated_names_counts(self):
        with pytest.raises(ImageFormatError, match="expected 12 bytes .* found 5"):
            decode_netpbm(b"P6\n2 2\n255\n" + bytes(5))

    def test_bad_magic_offset(self):
        with pytest.raises(ImageFormatError, match="byte 0"):
            decode_netpbm(b"P3\n1 1\n255\n0 0 0")

    def test_sixteen_bit_rejected(self):
        with pytest.raises(ImageFormatError):
            decode_netpbm(b"P5\n1 1\n65535\n\x00\x00")

    @pytest.mark.parametrize("ext", [".ppm", ".png"])
    def test_round_trip(self, tmp_path, ext):
        img = synthetic_image(0, (13, 17))
        save_image(img, tmp_path / f"a{ext}")
        back = load_image(tmp_path / f"a{ext}")
        np.testing.assert_array_equal(back.planes, img.planes)

    def test_gray_pgm(self, tmp_path):
        img = Image(np.arange(12, dtype=np.uint8).reshape(1, 3, 4), "Gray")
        save_image(img, tmp_path / "g.pgm")
        assert (tmp_path / "g.pgm").read_bytes() == encode_netpbm(img)
        np.testing.assert_array_equal(load_image(tmp_path / "g.pgm").planes, img.planes)

    def test_unknown_extension(self, tmp_path):
        with pytest.raises(ImageFormatError):
            save_image(synthetic_image(0, (4, 4)), tmp_path / "a.bmp")

    def test_unknown_signature(self, tmp_path):
        (tmp_path / "x.ppm").write_bytes(b"GIF89a....")
        with pytest.raises(ImageFormatError):
            load_image(tmp_path / "x.ppm")


class TestData:
    def test_same_seed_same_batch(self):
        images = [synthetic_image(i, (40, 50)) for i in range(3)]
        a = sample_patches(images, 16, 10, seed=5, mode="gan")
        b = sample_patches(images, 16, 10, seed=5, mode="gan")
        np.testing.assert_array_equal(a, b)
        assert a.shape == (10, 3, 16, 16) and a.min() >= -1 and a.max() <= 1

    def test_count_zero(self):
        assert sample_patches([synthetic_image(0, (20, 20))], 8, 0, seed=0, mode="cae").shape == (0, 1, 8, 8)

    def test_crop_bounds(self):
        rng = np.random.default_rng(0)
        oy, ox = crop_origins(rng, 37, 53, 16, 10 ** 4)
        assert oy.min() >= 0 and ox.min() >= 0
        assert (oy + 16).max() <= 37 and (ox + 16).max() <= 53

    def test_undersized_skipped(self, caplog):
        images = [synthetic_image(0, (8, 8)), synthetic_image(1, (32, 32))]
        with caplog.at_level("WARNING"):
            batch = sample_patches(images, 16, 4, seed=0)
        assert batch.shape == (4, 3, 16, 16)
        assert "skipping image 0" in caplog.text

    def test_modes(self):
        img = [synthetic_image(2, (24, 24))]
        cae = sample_patches(img, 16, 3, 0, mode="cae")
        sr = sample_patches(img, 16, 3, 0, mode="sr")
        assert cae.shape == (3, 1, 16, 16) and -128 <= cae.min() and cae.max() <= 127
        assert sr.min() >= 0 and sr.max() <= 1
        with pytest.raises(ValueError):
            sample_patches(img, 16, 1, 0, mode="bogus")

    def test_split_is_by_name(self, tmp_path):
        assert split_of("a/b/img001.ppm") == split_of("other/img001.ppm")
        names = [f"img{i:04d}.ppm" for i in range(2000)]
        frac = sum(split_of(n) == "valid" for n in names) / len(names)
        assert 0.07 < frac < 0.13

    def test_corpus(self, tmp_path):
        for i in range(5):
            save_image(synthetic_image(i, (8, 8)), tmp_path / f"im{i}.ppm")
        (tmp_path / "notes.txt").write_text("x")
        c = Corpus(tmp_path)
        assert len(c) == 5 and all(im.width == 8 for im in c)
        with pytest.raises(ValueError):
            Corpus([], "all")

    def test_loss_log(self, tmp_path):
        log = LossLog(tmp_path / "l.csv")
        log(0, 1.5)
        LossLog(tmp_path / "l.csv")(1, 0.5, 0.25)
        rows = list(csv.reader(open(tmp_path / "l.csv")))
        assert rows == [["step", "loss", "aux"], ["0", "1.5", ""], ["1", "0.5", "0.25"]]


@pytest.fixture
def workdir(tmp_path):
    save_image(synthetic_image(0, (48, 64)), tmp_path / "in.ppm")
    return tmp_path


def lic(*argv):
    return run_command([str(a) for a in argv])


class TestCli:
    def test_sr_round_trip(self, workdir):
        d = workdir
        assert lic("encode", "--codec", "sr", "--threshold", "33.0", "--base", "builtin", "--qp", "80",
                   "-i", d / "in.ppm", "-o", d / "out.lic") == EXIT_OK
        assert lic("decode", "-i", d / "out.lic", "-o", d / "rec.ppm") == EXIT_OK
        a, b = load_image(d / "in.ppm"), load_image(d / "rec.ppm")
        assert (a.width, a.height) == (b.width, b.height)

    def test_encode_is_reproducible(self, workdir):
        d = workdir
        for name in ("a.lic", "b.lic"):
            assert lic("encode", "--codec", "sr", "-i", d / "in.ppm", "-o", d / name) == EXIT_OK
        assert (d / "a.lic").read_bytes() == (d / "b.lic").read_bytes()

    def test_eval_identical(self, workdir, capsys):
        d = workdir
        assert lic("eval", "-a", d / "in.ppm", "-b", d / "in.ppm") == EXIT_OK
        rows = list(csv.DictReader(capsys.readouterr().out.splitlines()))
        assert rows[0]["psnr_db"] == "inf" and float(rows[0]["ms_ssim"]) == 1.0

    def test_eval_appends(self, workdir):
        d = workdir
        for _ in range(2):
            lic("eval", "-a", d / "in.ppm", "-b", d / "in.ppm", "--out", d / "m.csv")
        lines = (d / "m.csv").read_text().splitlines()
        assert lines[0] == "reference,test,psnr_db,ms_ssim" and len(lines) == 3

    def test_cae_with_checkpoint_and_recon(self, workdir):
        d = workdir
        save_checkpoint(d / "cae.licw", CaeModel(CaeConfig(channels=(8, 8), latent_channels=8)).state_dict())
        assert lic("encode", "--codec", "cae", "--model", d / "cae.licw", "--bits", "6", "-i", d / "in.ppm",
                   "-o", d / "c.lic", "--recon", d / "enc.ppm") == EXIT_OK
        assert lic("decode", "-i", d / "c.lic", "-o", d / "dec.ppm", "--model", d / "cae.licw") == EXIT_OK
        assert (d / "enc.ppm").read_bytes() == (d / "dec.ppm").read_bytes()

    def test_train_writes_checkpoint_and_log(self, workdir):
        d = workdir
        assert lic("train", "--codec", "sr", "--corpus", d, "--split", "all", "--steps", "3", "--batch", "2",
                   "--out", d / "sr.licw", "--log", d / "loss.csv") == EXIT_OK
        assert (d / "sr.licw").exists()
        assert len((d / "loss.csv").read_text().splitlines()) == 4

    def test_compare_schema(self, workdir, capsys):
        d = workdir
        save_image(synthetic_image(1, (48, 64), texture=0.7), d / "in2.ppm")
        assert lic("compare", "--codecs", "cae,sr", "--corpus", d, "--out", d / "rd.csv",
                   "--train-steps", "2") == EXIT_OK
        rows = list(csv.DictReader(open(d / "rd.csv")))
        assert list(rows[0]) == ["codec", "config", "bpp", "psnr_db", "ms_ssim"]
        for codec, n in (("cae", 4), ("sr", 4)):
            bpp = [float(r["bpp"]) for r in rows if r["codec"] == codec]
            assert len(bpp) == n and bpp == sorted(bpp)
        assert "anchor=cae  test=sr" in capsys.readouterr().out

    def test_unknown_flag(self, capsys):
        assert lic("encode", "--bogus") == EXIT_USAGE
        assert "usage" in capsys.readouterr().err

    def test_missing_model_is_usage_error(self, workdir):
        assert lic("encode", "--codec", "cae", "-i", workdir / "in.ppm", "-o", workdir / "x.lic") == EXIT_USAGE

    def test_missing_input_is_io_error(self, workdir, capsys):
        assert lic("encode", "--codec", "sr", "-i", workdir / "nope.ppm", "-o", workdir / "x.lic") == EXIT_IO
        assert "lic: error" in capsys.readouterr().err

    def test_corrupt_stream(self, workdir):
        (workdir / "bad.lic").write_bytes(b"LIC1garbage")
        assert lic("decode", "-i", workdir / "bad.lic", "-o", workdir / "r.ppm") == EXIT_IO

    def test_wrong_model_kind(self, workdir):
        d = workdir
        save_checkpoint(d / "cae.licw", CaeModel(CaeConfig(channels=(8, 8), latent_channels=8)).state_dict())
        assert lic("encode", "--codec", "gan", "--model", d / "cae.licw", "-i", d / "in.ppm",
                   "-o", d / "x.lic") == EXIT_USAGE

    def test_config_precedence(self, workdir):
        d = workdir
        (d / "cfg.txt").write_text("# sweep settings\nqp = 20\nthreshold = 1000\n")
        lic("encode", "--codec", "sr", "--config", d / "cfg.txt", "-i", d / "in.ppm", "-o", d / "c.lic")
        lic("encode", "--codec", "sr", "--config", d / "cfg.txt", "--qp", "90", "-i", d / "in.ppm",
            "-o", d / "f.lic")
        lic("encode", "--codec", "sr", "--qp", "20", "--threshold", "1000", "-i", d / "in.ppm", "-o", d / "g.lic")
        assert (d / "c.lic").read_bytes() == (d / "g.lic").read_bytes()
        assert len((d / "f.lic").read_bytes()) > len((d / "c.lic").read_bytes())

    def test_config_unknown_key(self, workdir):
        (workdir / "cfg.txt").write_text("nonsense = 1\n")
        assert lic("encode", "--codec", "sr", "--config", workdir / "cfg.txt", "-i", workdir / "in.ppm",
                   "-o", workdir / "x.lic") == EXIT_USAGE
