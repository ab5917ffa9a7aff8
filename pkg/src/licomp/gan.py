"""GAN codec: an encoder E maps each square tile to a length-N code, a
generator G maps codes back to tiles, and a discriminator D shapes G's output
through a feature-matching term on its five convolution outputs.

E and D share one layout: five stride-2 4x4 convolutions (16 -> 256 channels)
with leaky ReLU(0.2), batch norm after all but the first, then a linear head
(N outputs for E, one sigmoid probability for D).  G projects N to a
256-channel (tile/32)^2 map and doubles it five times with transposed
convolutions, batch norm + ReLU in between and tanh at the output.  Tiles are
fed in the tanh range [-1, 1].

Stream (codec id 1) header::

    tile u16 | code_size u16 | interp_scale_x100 u16 | quant_bits u8 | use_pca u8
    | tiles_x u16 | tiles_y u16 | <latent section over N channels>

followed by the range-coded tile codes as the payload.  ``use_pca`` records
whether a basis was actually fitted (it needs at least 2N tiles).
"""

from dataclasses import dataclass

import numpy as np

from licomp.codec.bitstream import (
    CODEC_GAN, ByteWriter, pack_container, read_latent_section, read_payload, write_latent_section,
)
from licomp.codec.image import FeatureBlock, Image, pad_to_multiple, to_u8
from licomp.codec.latent import decode_latent, encode_latent, fit_basis, reconstruct_latent
from licomp.errors import BitstreamError, DimensionError, NumericError
from licomp.sr.resample import resample_planes, scaled_size
from licomp.tensor import (
    Adam, Tensor, add, backward, clip, leaky_relu, log, mean, mse, mul, no_grad, relu, sigmoid,
    sub, tanh,
)
from licomp.tensor.nn import BatchNorm, Conv2d, ConvTranspose2d, Linear, Module

WIDTHS = (3, 16, 32, 64, 128, 256)
N_TAPS = 5
BCE_EPS = 1e-7
INFER_CHUNK = 16


@dataclass(frozen=True)
class GanConfig:
    tile: int = 128
    code_size: int = 256
    interp_scale: float = 1.0
    quant_bits: int = 8
    beta: float = 0.01
    use_pca: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.tile < 32 or self.tile & (self.tile - 1):
            raise ValueError(f"tile must be a power of two >= 32, got {self.tile}")
        if self.code_size < 16:
            raise ValueError(f"code size must be >= 16, got {self.code_size}")
        if not 5 <= self.quant_bits <= 8:
            raise ValueError(f"quant_bits must be in [5, 8], got {self.quant_bits}")
        if not 0 < self.interp_scale <= 655.35:
            raise ValueError(f"interp_scale must be positive, got {self.interp_scale}")
        if abs(round(self.interp_scale * 100) - self.interp_scale * 100) > 1e-6:
            raise ValueError(f"interp_scale {self.interp_scale} is not a multiple of 0.01")
        if self.beta < 0:
            raise ValueError("beta must be non-negative")

    @property
    def head_side(self):
        return self.tile // 32


class Critic(Module):
    """Discriminator-shaped network; ``out`` = N for the encoder, 1 for D."""

    def __init__(self, tile, out, rng):
        super().__init__()
        self.convs = [Conv2d(WIDTHS[i], WIDTHS[i + 1], 4, 2, 1, rng) for i in range(N_TAPS)]
        self.norms = [BatchNorm(WIDTHS[i + 1]) for i in range(1, N_TAPS)]
        self.head = Linear(WIDTHS[-1] * (tile // 32) ** 2, out, rng)

    def forward(self, x, taps=False):
        outs = []
        for i, conv in enumerate(self.convs):
            x = conv(x)
            outs.append(x)
            if i > 0:
                x = self.norms[i - 1](x)
            x = leaky_relu(x, 0.2)
        x = self.head(x.reshape(x.shape[0], -1))
        return (x, outs) if taps else x


class Generator(Module):
    def __init__(self, tile, code_size, rng):
        super().__init__()
        self.side = tile // 32
        self.project = Linear(code_size, WIDTHS[-1] * self.side ** 2, rng)
        self.norm0 = BatchNorm(WIDTHS[-1])
        self.ups = [ConvTranspose2d(WIDTHS[5 - i], WIDTHS[4 - i], 4, 2, 1, rng) for i in range(5)]
        self.norms = [BatchNorm(WIDTHS[4 - i]) for i in range(4)]

    def forward(self, z):
        x = self.project(z).reshape(z.shape[0], WIDTHS[-1], self.side, self.side)
        x = relu(self.norm0(x))
        for i, up in enumerate(self.ups):
            x = up(x)
            x = relu(self.norms[i](x)) if i < 4 else tanh(x)
        return x


class GanModel(Module):
    def __init__(self, config=None):
        super().__init__()
        self.config = config or GanConfig()
        cfg = self.config
        rng = np.random.default_rng(cfg.seed)
        self.E = Critic(cfg.tile, cfg.code_size, rng)
        self.G = Generator(cfg.tile, cfg.code_size, rng)
        self.D = Critic(cfg.tile, 1, rng)

    def forward(self, x):
        return self.G(self.E(x))

    def discriminate(self, x, taps=False):
        if taps:
            logit, outs = self.D(x, taps=True)
            return sigmoid(logit), outs
        return sigmoid(self.D(x))

    @classmethod
    def from_state(cls, state, **overrides):
        """Rebuild tile size and code size from checkpoint shapes."""
        try:
            fin, code = np.shape(state["E.head.weight"])
        except KeyError:
            raise ValueError("checkpoint has no GAN encoder head (E.head.weight)") from None
        side = int(round(np.sqrt(fin // WIDTHS[-1])))
        model = cls(GanConfig(tile=32 * side, code_size=int(code), **overrides))
        model.load_state_dict(state)
        return model.eval()


def to_tanh(planes_u8):
    """8-bit (N,3,H,W) or (3,H,W) samples -> float32 in [-1, 1]."""
    arr = np.asarray(planes_u8, dtype=np.float32)
    if arr.ndim == 3:
        arr = arr[None]
    return arr / 127.5 - 1.0


def from_tanh(values):
    """Network output in [-1, 1] -> float samples in [0, 255] (not rounded)."""
    return (np.asarray(values, dtype=np.float64) + 1.0) * 127.5


def gan_g_loss(x, x_hat, taps_x, taps_xhat, beta):
    """Reconstruction MSE plus ``beta`` times the summed mean-square tap differences."""
    if x.shape != x_hat.shape:
        raise DimensionError(f"x and x_hat differ in shape: {x.shape} vs {x_hat.shape}")
    if len(taps_x) != len(taps_xhat):
        raise DimensionError(f"tap lists differ in length: {len(taps_x)} vs {len(taps_xhat)}")
    loss = mse(x_hat, x)
    if not taps_x:
        return loss
    match = None
    for i, (a, b) in enumerate(zip(taps_x, taps_xhat)):
        if a.shape != b.shape:
            raise DimensionError(f"tap {i} shapes differ: {a.shape} vs {b.shape}")
        term = mse(b, a)
        match = term if match is None else add(match, term)
    return add(loss, mul(match, float(beta)))


def gan_d_loss(d_real, d_fake):
    """Binary cross-entropy: real labelled 1, reconstructions labelled 0."""
    real = log(clip(d_real, BCE_EPS, 1.0 - BCE_EPS))
    fake = log(clip(sub(1.0, d_fake), BCE_EPS, 1.0 - BCE_EPS))
    return mul(add(mean(real), mean(fake)), -1.0)


def gan_optimizers(model, lr=1e-4, beta1=0.9):
    """(encoder+generator optimizer, discriminator optimizer)."""
    return (Adam(model.E.params() + model.G.params(), lr=lr, beta1=beta1),
            Adam(model.D.params(), lr=lr, beta1=beta1))


def gan_train_step(model, batch, optimizers):
    """One D update then one E+G update on a [-1, 1] NCHW batch; returns (g_loss, d_loss)."""
    opt_g, opt_d = optimizers
    tile = model.config.tile
    if batch.shape[1:] != (3, tile, tile):
        raise DimensionError(f"expected (N, 3, {tile}, {tile}) tiles, got {batch.shape}")
    x = batch if isinstance(batch, Tensor) else Tensor(batch)
    model.train()

    with no_grad():
        fake = model(x)
    opt_d.zero_grad()
    d_loss = gan_d_loss(model.discriminate(x), model.discriminate(fake))
    d_value = d_loss.item()
    if not np.isfinite(d_value):
        raise NumericError(f"non-finite discriminator loss {d_value}")
    backward(d_loss)
    opt_d.step()

    opt_g.zero_grad()
    x_hat = model(x)
    with no_grad():
        _, taps_x = model.D(x, taps=True)
    _, taps_xhat = model.D(x_hat, taps=True)
    g_loss = gan_g_loss(x, x_hat, taps_x, taps_xhat, model.config.beta)
    g_value = g_loss.item()
    if not np.isfinite(g_value):
        raise NumericError(f"non-finite generator loss {g_value}")
    backward(g_loss)
    opt_g.step()
    model.D.zero_grad()
    return g_value, d_value


def tap_distance(model, x):
    """Summed mean-square tap difference between x and its reconstruction (eval mode)."""
    model.eval()
    with no_grad():
        xt = Tensor(x)
        _, a = model.D(xt, taps=True)
        _, b = model.D(model(xt), taps=True)
    return float(sum(np.mean((p.data - q.data) ** 2) for p, q in zip(a, b)))


# -- codec ------------------------------------------------------------------


def _tiles_of(planes, tile):
    _, h, w = planes.shape
    ty, tx = h // tile, w // tile
    return planes.reshape(3, ty, tile, tx, tile).transpose(1, 3, 0, 2, 4).reshape(-1, 3, tile, tile)


def _stitch(tiles, tx, ty):
    tile = tiles.shape[-1]
    return tiles.reshape(ty, tx, 3, tile, tile).transpose(2, 0, 3, 1, 4).reshape(3, ty * tile, tx * tile)


def _run_chunks(fn, arr):
    outs = []
    with no_grad():
        for i in range(0, arr.shape[0], INFER_CHUNK):
            outs.append(fn(Tensor(arr[i:i + INFER_CHUNK])).data)
    return np.concatenate(outs)


def _scaled_planes(img, scale):
    planes = img.planes.astype(np.float64)
    if scale == 1.0:
        return planes
    size = scaled_size(img.width, img.height, scale)
    return np.clip(resample_planes(planes, size, "bicubic"), 0.0, 255.0)


def _synthesize(model, codes, tx, ty, scaled_wh, orig_wh):
    """Codes (T, N) -> 8-bit RGB image at the original size."""
    model.eval()
    tiles = from_tanh(_run_chunks(model.G, codes.astype(np.float32)))
    canvas = _stitch(tiles, tx, ty)[:, :scaled_wh[1], :scaled_wh[0]]
    if scaled_wh != orig_wh:
        canvas = resample_planes(canvas, orig_wh, "bicubic")
    return Image(to_u8(canvas), "RGB")


def _codes_to_block(codes, tx, ty):
    return FeatureBlock(codes.T.reshape(-1, ty, tx))


def gan_encode(img, model, cfg=None, return_reconstruction=False):
    """Code an RGB image tile by tile into a codec-1 :class:`Bitstream`.

    ``cfg`` overrides the rate knobs (interp_scale, quant_bits, use_pca) of
    ``model.config``; tile and code size always come from the model.
    """
    mcfg = model.config
    cfg = cfg or mcfg
    if (cfg.tile, cfg.code_size) != (mcfg.tile, mcfg.code_size):
        raise ValueError("config tile/code size differ from the model's")
    if img.colorspace == "YCbCr":
        raise ValueError("GAN codec takes RGB input; convert YCbCr first")
    if img.colorspace != "RGB":
        raise DimensionError(f"GAN codec needs a 3-plane RGB image, got {img.colorspace}")
    img = img.to_u8()
    planes = _scaled_planes(img, cfg.interp_scale)
    sh, sw = planes.shape[1:]
    if sh < cfg.tile or sw < cfg.tile:
        raise DimensionError(
            f"image {img.width}x{img.height} at scale {cfg.interp_scale} is {sw}x{sh}, "
            f"smaller than one {cfg.tile}x{cfg.tile} tile"
        )
    padded, _, _ = pad_to_multiple(planes, cfg.tile)
    tiles = _tiles_of(padded, cfg.tile)
    ty, tx = padded.shape[1] // cfg.tile, padded.shape[2] // cfg.tile
    model.eval()
    codes = _run_chunks(model.E, (tiles / 127.5 - 1.0).astype(np.float32)).astype(np.float64)
    fb = _codes_to_block(codes, tx, ty)
    basis = fit_basis(fb) if cfg.use_pca and codes.shape[0] >= 2 * cfg.code_size else None
    code = encode_latent(fb, cfg.quant_bits, basis)
    w = ByteWriter().put(
        "HHHBBHH", cfg.tile, cfg.code_size, int(round(cfg.interp_scale * 100)), cfg.quant_bits,
        int(basis is not None), tx, ty,
    )
    write_latent_section(w, code.qp, code.basis, code.symbol_count)
    bs = pack_container(CODEC_GAN, img.width, img.height, w.getvalue(), code.data)
    if not return_reconstruction:
        return bs
    rec_codes = reconstruct_latent(code.codes, code.qp, code.basis).values.reshape(cfg.code_size, -1).T
    return bs, _synthesize(model, rec_codes, tx, ty, (sw, sh), (img.width, img.height))


def gan_decode(bs, model):
    cfg = model.config
    r = bs.reader(CODEC_GAN)
    tile, code_size, scale100, bits, use_pca, tx, ty = r.get("HHHBBHH")
    if (tile, code_size) != (cfg.tile, cfg.code_size):
        raise BitstreamError(
            f"stream geometry (tile={tile}, N={code_size}) does not match model "
            f"(tile={cfg.tile}, N={cfg.code_size})"
        )
    if scale100 == 0 or use_pca not in (0, 1):
        raise BitstreamError("invalid GAN header fields")
    sw, sh = scaled_size(bs.width, bs.height, scale100 / 100.0)
    if (tx, ty) != (-(-sw // tile), -(-sh // tile)):
        raise BitstreamError(f"tile grid {tx}x{ty} inconsistent with a {sw}x{sh} scaled image")
    qp, basis, count = read_latent_section(r, with_pca=bool(use_pca))
    if qp.bits != bits:
        raise BitstreamError("quantizer bit depth disagrees with the GAN header")
    if count != code_size * tx * ty:
        raise BitstreamError(f"symbol count {count} != {code_size}x{tx * ty} tiles")
    data = read_payload(r)
    fb = decode_latent(data, qp, basis, (code_size, ty, tx))
    codes = fb.values.reshape(code_size, -1).T
    return _synthesize(model, codes, tx, ty, (sw, sh), (bs.width, bs.height))
