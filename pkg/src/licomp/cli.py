"""``lic`` command line: train, encode, decode, eval, compare.

Exit codes: 0 success, 2 usage or invalid value, 3 I/O or stream error,
4 numeric failure.  Any subcommand also accepts ``--config FILE`` with UTF-8
``key = value`` lines (``#`` comments); explicit flags win over the file,
which wins over built-in defaults.
"""

import argparse
import logging
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from licomp.codec.bitstream import CODEC_CAE, CODEC_GAN, CODEC_SR, Bitstream
from licomp.errors import (
    BitstreamError, ExternalToolError, ImageFormatError, LicError, NumericError,
)

log = logging.getLogger("licomp")

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_NUMERIC = 0, 2, 3, 4
CODECS = ("cae", "gan", "sr")


class UsageError(LicError):
    """Bad flag combination or value detected after parsing."""


@dataclass
class RunConfig:
    """Validated settings for one command invocation."""

    command: str
    seed: int
    codec: str | None = None
    knobs: dict = field(default_factory=dict)
    paths: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.codec is not None and self.codec not in CODECS:
            raise UsageError(f"unknown codec {self.codec!r}")
        if self.seed < 0:
            raise UsageError("seed must be non-negative")


# -- config file ------------------------------------------------------------


def read_config_file(path):
    values = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ImageFormatError(f"cannot read config {path}: {exc.strerror}") from None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        values[key.replace("-", "_")] = value
    return values


_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _apply_config(parser, argv, sub_parsers):
    """Re-parse with config-file values installed as defaults (flags still win)."""
    args = parser.parse_args(argv)
    if not getattr(args, "config", None):
        return args
    sub = sub_parsers[args.command]
    actions = {a.dest: a for a in sub._actions if a.dest not in ("help", "config")}
    values = read_config_file(args.config)
    defaults = {}
    for key, value in values.items():
        if key not in actions:
            raise UsageError(f"unknown config key {key!r} for '{args.command}'")
        action = actions[key]
        if isinstance(action, (argparse._StoreTrueAction, argparse._StoreFalseAction)):
            low = value.lower()
            if low not in _TRUE | _FALSE:
                raise UsageError(f"config key {key!r} expects a boolean, got {value!r}")
            defaults[key] = low in _TRUE
        else:
            defaults[key] = value  # argparse applies ``type`` to string defaults
    sub.set_defaults(**defaults)
    return parser.parse_args(argv)


# -- model loading ----------------------------------------------------------


def load_model(path, expect=None):
    from licomp.cae import CaeModel
    from licomp.gan import GanModel
    from licomp.sr.srcnn import SrcnnModel
    from licomp.tensor import load_checkpoint

    state = load_checkpoint(path)
    if any(k.startswith("enc.") for k in state):
        kind, model = "cae", CaeModel.from_state(state)
    elif any(k.startswith("E.") for k in state):
        kind, model = "gan", GanModel.from_state(state)
    elif any(k.startswith("weights.") for k in state):
        kind, model = "sr", SrcnnModel.from_state(state)
    else:
        raise BitstreamError(f"{path}: checkpoint does not match any codec network")
    if expect and kind != expect:
        raise UsageError(f"{path} holds a {kind} model, expected {expect}")
    return model


def default_srcnn():
    """Pass-through SRCNN used when no checkpoint is given (bicubic upscaling)."""
    from licomp.sr.srcnn import SrcnnModel

    return SrcnnModel(init="identity").eval()


def _require_model(args, codec):
    if codec == "sr":
        return load_model(args.model, "sr") if args.model else default_srcnn()
    if not args.model:
        raise UsageError(f"--model is required for the {codec} codec")
    return load_model(args.model, codec)


# -- commands ---------------------------------------------------------------


def _gan_config(model, args):
    from dataclasses import replace

    return replace(model.config, interp_scale=args.interp_scale, quant_bits=args.bits,
                   use_pca=not args.no_pca)


def encode_image(img, codec, model, args, return_reconstruction=False):
    if codec == "cae":
        from licomp.cae import cae_encode

        return cae_encode(img, model, args.bits, return_reconstruction)
    if codec == "gan":
        from licomp.gan import gan_encode

        return gan_encode(img, model, _gan_config(model, args), return_reconstruction)
    from licomp.sr import AdaptiveConfig, BaseCodecParams, sr_decode, sr_encode

    bs = sr_encode(img, model, AdaptiveConfig(threshold=args.threshold),
                   BaseCodecParams(args.base, args.qp))
    return (bs, sr_decode(bs, model)) if return_reconstruction else bs


def decode_stream(bs, model):
    if bs.codec_id == CODEC_CAE:
        from licomp.cae import cae_decode

        return cae_decode(bs, model)
    if bs.codec_id == CODEC_GAN:
        from licomp.gan import gan_decode

        return gan_decode(bs, model)
    if bs.codec_id == CODEC_SR:
        from licomp.sr import sr_decode

        return sr_decode(bs, model)
    raise BitstreamError(f"unknown codec id {bs.codec_id}")


def cmd_encode(args):
    from licomp.io import load_image, save_image

    RunConfig("encode", args.seed, args.codec)
    img = load_image(args.input)
    model = _require_model(args, args.codec)
    result = encode_image(img, args.codec, model, args, bool(args.recon))
    bs, rec = result if args.recon else (result, None)
    Path(args.output).write_bytes(bs.data)
    if rec is not None:
        save_image(rec, args.recon)
    print(f"{args.output}: {len(bs.data)} bytes, {bs.bpp():.4f} bpp")
    return EXIT_OK


def cmd_decode(args):
    from licomp.codec.bitstream import CODEC_NAMES
    from licomp.io import save_image

    try:
        data = Path(args.input).read_bytes()
    except OSError as exc:
        raise ImageFormatError(f"cannot read {args.input}: {exc.strerror}") from None
    bs = Bitstream(data)
    codec = CODEC_NAMES.get(bs.codec_id)
    if codec is None:
        raise BitstreamError(f"unknown codec id {bs.codec_id}")
    model = _require_model(args, codec)
    save_image(decode_stream(bs, model), args.output)
    print(f"{args.output}: {bs.width}x{bs.height}")
    return EXIT_OK


def _fmt_psnr(value):
    return "inf" if math.isinf(value) else f"{value:.4f}"


def cmd_eval(args):
    import csv

    from licomp.io import load_image
    from licomp.metrics import ms_ssim, psnr

    a, b = load_image(args.a), load_image(args.b)
    row = {"reference": args.a, "test": args.b, "psnr_db": _fmt_psnr(psnr(a, b)),
           "ms_ssim": f"{ms_ssim(a, b):.6f}"}
    fh = open(args.out, "a", newline="") if args.out else sys.stdout
    try:
        writer = csv.DictWriter(fh, fieldnames=list(row), lineterminator="\n")
        if not args.out or fh.tell() == 0:
            writer.writeheader()
        writer.writerow(row)
    finally:
        if args.out:
            fh.close()
    return EXIT_OK


def _images(corpus_dir, split):
    from licomp.data import Corpus

    return list(Corpus(corpus_dir, split))


def cmd_train(args):
    from licomp.cae import CaeConfig
    from licomp.gan import GanConfig
    from licomp.tensor import save_checkpoint
    from licomp.training import LossLog, train_cae, train_gan, train_srcnn

    RunConfig("train", args.seed, args.codec)
    images = _images(args.corpus, args.split)
    loss_log = LossLog(args.log)
    if args.codec == "cae":
        model = train_cae(images, args.steps, CaeConfig(lam=args.lam, seed=args.seed),
                          batch=args.batch, patch=args.patch or 32, lr=args.lr, seed=args.seed,
                          log=loss_log)
    elif args.codec == "gan":
        cfg = GanConfig(tile=args.tile, code_size=args.code_size, beta=args.beta, seed=args.seed)
        model = train_gan(images, args.steps, cfg, batch=args.batch, lr=args.lr, seed=args.seed,
                          log=loss_log)
    else:
        model = train_srcnn(images, args.steps, batch=args.batch, patch=args.patch or 24,
                            lr=args.lr, seed=args.seed, log=loss_log)
    save_checkpoint(args.out, model.state_dict())
    print(f"{args.out}: {args.codec} model after {args.steps} steps")
    return EXIT_OK


def sweep_configs(codec, args):
    """The per-codec knob values swept by ``compare`` (one RD point each)."""
    if codec in ("cae", "gan"):
        return [{"bits": b} for b in (5, 6, 7, 8)]
    return [{"qp": q} for q in args.sr_qps]


def _sweep_args(args, cfg):
    ns = argparse.Namespace(**vars(args))
    for key, value in cfg.items():
        setattr(ns, key, value)
    return ns


def cmd_compare(args):
    from licomp.cae import CaeConfig
    from licomp.gan import GanConfig
    from licomp.metrics import bd_rate_report, rd_sweep, write_rd_csv
    from licomp.training import train_cae, train_gan, train_srcnn

    RunConfig("compare", args.seed)
    codecs = [c.strip() for c in args.codecs.split(",") if c.strip()]
    for c in codecs:
        if c not in CODECS:
            raise UsageError(f"unknown codec {c!r} in --codecs")
    corpus = _images(args.corpus, args.split)
    checkpoints = dict(kv.split("=", 1) for kv in args.models.split(",") if kv) if args.models else {}
    curves = []
    for codec in codecs:
        if codec in checkpoints:
            model = load_model(checkpoints[codec], codec)
        else:
            log.warning("no %s checkpoint given; training a toy model for %d steps", codec, args.train_steps)
            if codec == "cae":
                model = train_cae(corpus, args.train_steps, CaeConfig(seed=args.seed), seed=args.seed)
            elif codec == "gan":
                model = train_gan(corpus, args.train_steps, GanConfig(tile=args.tile, code_size=args.code_size,
                                                                      seed=args.seed), seed=args.seed)
            else:
                model = train_srcnn(corpus, args.train_steps, seed=args.seed)

        def enc(img, cfg, codec=codec, model=model):
            return encode_image(img, codec, model, _sweep_args(args, cfg))

        def dec(bs, model=model):
            return decode_stream(bs, model)

        curve = rd_sweep(corpus, enc, dec, sweep_configs(codec, args), label=codec)
        for msg in curve.warnings:
            print(f"warning: {msg}", file=sys.stderr)
        curves.append(curve)
    with open(args.out, "w", newline="") as fh:
        write_rd_csv(curves, fh)
    print(f"{args.out}: {sum(len(c.points) for c in curves)} RD points")
    for test in curves[1:]:
        print(bd_rate_report(curves[0], test), end="")
    return EXIT_OK


# -- parser -----------------------------------------------------------------


def _codec_knobs(p):
    p.add_argument("--bits", type=int, default=8, help="latent quantizer bits (cae, gan)")
    p.add_argument("--interp-scale", type=float, default=1.0, help="GAN bicubic pre-scale")
    p.add_argument("--no-pca", action="store_true", help="GAN: disable PCA over tile codes")
    p.add_argument("--threshold", type=float, default=33.0, help="SR Pre_PSNR threshold in dB")
    p.add_argument("--base", choices=("builtin", "bpg"), default="builtin", help="SR base codec")
    p.add_argument("--qp", type=int, default=80, help="SR base codec quality / QP")


def build_parser():
    parser = argparse.ArgumentParser(prog="lic", description="Learned image compression toolkit")
    parser.add_argument("-v", "--verbose", action="store_true")
    subs = parser.add_subparsers(dest="command", required=True)
    sub_parsers = {}

    def add(name, help_text):
        p = subs.add_parser(name, help=help_text)
        p.add_argument("--config", help="key = value file (flags take precedence)")
        p.add_argument("--seed", type=int, default=0)
        sub_parsers[name] = p
        return p

    p = add("train", "train a codec network and write a .licw checkpoint")
    p.add_argument("--codec", choices=CODECS, required=True)
    p.add_argument("--corpus", required=True, help="directory of .ppm/.pgm/.png images")
    p.add_argument("--split", choices=("train", "valid", "all"), default="train")
    p.add_argument("--out", required=True, help="checkpoint path (.licw)")
    p.add_argument("--log", help="loss log CSV (appended)")
    p.add_argument("--steps", type=int, default=1000)
    p.add_argument("--batch", type=int, default=8)
    p.add_argument("--patch", type=int, default=None)
    p.add_argument("--lr", type=float, default=1e-4)
    p.add_argument("--lam", type=float, default=0.01, help="CAE rate weight")
    p.add_argument("--code-size", type=int, default=256, help="GAN code size N")
    p.add_argument("--tile", type=int, default=128, help="GAN tile side")
    p.add_argument("--beta", type=float, default=0.01, help="GAN feature-matching weight")

    p = add("encode", "compress an image into a .lic stream")
    p.add_argument("--codec", choices=CODECS, required=True)
    p.add_argument("-i", "--input", required=True)
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--model", help="checkpoint (.licw); optional for sr")
    p.add_argument("--recon", help="also write the encoder-side reconstruction")
    _codec_knobs(p)

    p = add("decode", "decompress a .lic stream")
    p.add_argument("-i", "--input", required=True)
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--model", help="checkpoint (.licw); optional for sr")

    p = add("eval", "PSNR and MS-SSIM between two images (CSV row)")
    p.add_argument("-a", required=True, help="reference image")
    p.add_argument("-b", required=True, help="test image")
    p.add_argument("--out", help="append the row to this CSV instead of stdout")

    p = add("compare", "rate-distortion sweep over a corpus")
    p.add_argument("--codecs", required=True, help="comma list of cae,gan,sr")
    p.add_argument("--corpus", required=True)
    p.add_argument("--split", choices=("train", "valid", "all"), default="all")
    p.add_argument("--out", required=True, help="combined RD CSV")
    p.add_argument("--models", help="codec=checkpoint pairs, comma separated")
    p.add_argument("--train-steps", type=int, default=200, help="steps for toy models when no checkpoint")
    p.add_argument("--code-size", type=int, default=64, help="GAN code size for toy models")
    p.add_argument("--tile", type=int, default=64, help="GAN tile for toy models")
    p.add_argument("--sr-qps", type=lambda s: [int(v) for v in s.split(",")], default=[30, 50, 70, 90])
    _codec_knobs(p)
    return parser, sub_parsers


COMMANDS = {"train": cmd_train, "encode": cmd_encode, "decode": cmd_decode, "eval": cmd_eval,
            "compare": cmd_compare}


def run_command(argv):
    parser, sub_parsers = build_parser()
    try:
        args = _apply_config(parser, argv, sub_parsers)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    except UsageError as exc:
        print(f"lic: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ImageFormatError as exc:
        print(f"lic: error: {exc}", file=sys.stderr)
        return EXIT_IO
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (LicError, ValueError, OSError) as exc:
        print(f"lic: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exit_code_for(exc)


def exit_code_for(exc):
    if isinstance(exc, NumericError):
        return EXIT_NUMERIC
    if isinstance(exc, (BitstreamError, ImageFormatError, ExternalToolError, OSError)):
        return EXIT_IO
    return EXIT_USAGE


def main(argv=None):
    sys.exit(run_command(sys.argv[1:] if argv is None else argv))


if __name__ == "__main__":
    main()
