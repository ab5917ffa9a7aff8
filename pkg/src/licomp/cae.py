"""Convolutional-autoencoder codec.

Network: ``stages`` down-sampling stages, each a stride-2 4x4 convolution
followed by a stride-1 3x3 convolution, PReLU after every convolution except
the one producing the latent.  The decoder mirrors it with stride-2
transposed convolutions.  One single-channel network codes every plane
(Y, Cb, Cr or Gray); samples enter the network in 8-bit units centred on
128, so the training noise (half-width 0.5 by default) is on the scale of a
unit quantization step.

Stream (codec id 0) header::

    stages u8 | latent_channels u16 | pad_right u8 | pad_bottom u8 | planes u8

and the payload is one sub-stream per plane::

    <latent section with PCA> | data_len u32 | range-coded codes
"""

from dataclasses import dataclass, field

import numpy as np

from licomp.codec.bitstream import (
    CODEC_CAE,
    ByteReader,
    ByteWriter,
    pack_container,
    read_latent_section,
    read_payload,
    write_latent_section,
)
from licomp.codec.image import FeatureBlock, Image, convert_colorspace, pad_to_multiple, to_u8
from licomp.codec.latent import decode_latent, encode_latent, fit_basis, reconstruct_latent
from licomp.errors import BitstreamError, DimensionError, NumericError
from licomp.tensor import Tensor, add, backward, mean, mse, mul, no_grad, square
from licomp.tensor.nn import Conv2d, ConvTranspose2d, Module, PReLU

PIXEL_OFFSET = 128.0


@dataclass
class CaeConfig:
    lam: float = 0.01
    noise_width: float = 0.5
    stages: int = 3
    channels: tuple = (32, 64)
    latent_channels: int = 32
    # quantizer step floor used by the codec; 2*noise_width matches the training proxy
    step_floor: float = 1.0
    seed: int = 0
    widths: list = field(init=False, repr=False)

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lambda must be non-negative")
        if self.stages < 1:
            raise ValueError("need at least one stage")
        chans = list(self.channels) or [self.latent_channels]
        while len(chans) < self.stages - 1:
            chans.append(chans[-1])
        self.widths = chans[: self.stages - 1] + [self.latent_channels]

    @property
    def factor(self):
        return 1 << self.stages


class CaeModel(Module):
    def __init__(self, config=None):
        super().__init__()
        self.config = config or CaeConfig()
        cfg = self.config
        rng = np.random.default_rng(cfg.seed)
        ins = [1] + cfg.widths[:-1]
        self.enc = []
        for i, (cin, cout) in enumerate(zip(ins, cfg.widths)):
            self.enc.append(Conv2d(cin, cout, 4, 2, 1, rng))
            self.enc.append(PReLU(cout))
            self.enc.append(Conv2d(cout, cout, 3, 1, 1, rng))
            if i < cfg.stages - 1:
                self.enc.append(PReLU(cout))
        dec_w = cfg.widths[::-1][1:] + [cfg.widths[0]]
        self.dec = []
        cin = cfg.latent_channels
        for i, cout in enumerate(dec_w):
            self.dec.append(ConvTranspose2d(cin, cout, 4, 2, 1, rng))
            self.dec.append(PReLU(cout))
            last = i == cfg.stages - 1
            self.dec.append(Conv2d(cout, 1 if last else cout, 3, 1, 1, rng))
            if not last:
                self.dec.append(PReLU(cout))
            cin = cout

    def encode(self, x):
        for layer in self.enc:
            x = layer(x)
        return x

    def decode(self, y):
        for layer in self.dec:
            y = layer(y)
        return y

    def forward(self, x):
        return self.decode(self.encode(x))

    @classmethod
    def from_state(cls, state, seed=0):
        """Rebuild geometry from checkpoint shapes (names ``enc.*`` / ``dec.*``)."""
        enc_convs = sorted(
            (int(k.split(".")[1]), v.shape) for k, v in state.items()
            if k.startswith("enc.") and k.endswith(".weight") and v.ndim == 4
        )
        if not enc_convs:
            raise ValueError("checkpoint has no CAE encoder weights")
        stages = len(enc_convs) // 2
        widths = [shape[0] for _, shape in enc_convs[::2]]
        cfg = CaeConfig(stages=stages, channels=tuple(widths[:-1]), latent_channels=widths[-1], seed=seed)
        model = cls(cfg)
        model.load_state_dict(state)
        return model.eval()


def to_net(planes_u8):
    """(N,H,W) or (N,1,H,W) 8-bit samples -> centred float32 NCHW."""
    arr = np.asarray(planes_u8, dtype=np.float32)
    if arr.ndim == 3:
        arr = arr[:, None]
    return arr - PIXEL_OFFSET


def from_net(values):
    return to_u8(np.asarray(values, dtype=np.float64) + PIXEL_OFFSET)


def cae_loss(x, x_hat, y, lam):
    """Mean-square distortion plus ``lam`` times mean-square latent amplitude."""
    if x.shape != x_hat.shape:
        raise DimensionError(f"x and x_hat differ in shape: {x.shape} vs {x_hat.shape}")
    return add(mse(x_hat, x), mul(mean(square(y)), float(lam)))


def cae_train_step(model, batch, optimizer, rng):
    """One Adam step on a centred NCHW batch; returns the loss value."""
    cfg = model.config
    if batch.shape[2] % cfg.factor or batch.shape[3] % cfg.factor:
        raise DimensionError(f"batch spatial dims {batch.shape[2:]} not divisible by {cfg.factor}")
    x = batch if isinstance(batch, Tensor) else Tensor(batch)
    model.train()
    optimizer.zero_grad()
    y = model.encode(x)
    if cfg.noise_width > 0:
        noise = rng.uniform(-cfg.noise_width, cfg.noise_width, size=y.shape).astype(y.dtype)
        y_noisy = add(y, noise)
    else:
        y_noisy = y
    loss = cae_loss(x, model.decode(y_noisy), y, cfg.lam)
    value = loss.item()
    if not np.isfinite(value):
        raise NumericError(f"non-finite CAE loss {value}")
    backward(loss)
    optimizer.step()
    return value


def reconstruct(model, x):
    """Noise-free forward pass in 8-bit units (no quantization)."""
    with no_grad():
        return from_net(model(Tensor(to_net(x))).data)


def _planes_for(img):
    img = img.to_u8()
    if img.colorspace == "RGB":
        img = convert_colorspace(img, "YCbCr")
    return img


def _assemble(planes, colorspace):
    out = Image(planes, colorspace)
    if colorspace == "YCbCr":
        out = convert_colorspace(out, "RGB")
    return out


def _synthesize(model, latents, pad_r, pad_b):
    batch = np.stack([fb.values for fb in latents]).astype(np.float32)
    with no_grad():
        planes = from_net(model.decode(Tensor(batch)).data)[:, 0]
    h, w = planes.shape[1:]
    return planes[:, : h - pad_b, : w - pad_r]


def cae_encode(img, model, bits=8, return_reconstruction=False):
    """Code ``img`` (RGB via YCbCr, or Gray) into a codec-0 :class:`Bitstream`."""
    cfg = model.config
    src = _planes_for(img)
    planes, pad_r, pad_b = pad_to_multiple(src.planes, cfg.factor)
    w = ByteWriter().put("BHBBB", cfg.stages, cfg.latent_channels, pad_r, pad_b, src.channels)
    model.eval()
    with no_grad():
        latent = model.encode(Tensor(to_net(planes))).data.astype(np.float64)
    payload = ByteWriter()
    recon_latents = []
    for y in latent:
        fb = FeatureBlock(y)
        code = encode_latent(fb, bits, fit_basis(fb, identity_fallback=True), cfg.step_floor)
        write_latent_section(payload, code.qp, code.basis, code.symbol_count)
        payload.put("I", len(code.data)).put_bytes(code.data)
        if return_reconstruction:
            recon_latents.append(reconstruct_latent(code.codes, code.qp, code.basis))
    bs = pack_container(CODEC_CAE, img.width, img.height, w.getvalue(), payload.getvalue())
    if not return_reconstruction:
        return bs
    rec = _assemble(_synthesize(model, recon_latents, pad_r, pad_b), src.colorspace)
    return bs, rec


def cae_decode(bs, model):
    cfg = model.config
    r = bs.reader(CODEC_CAE)
    stages, latent_c, pad_r, pad_b, n_planes = r.get("BHBBB")
    if stages != cfg.stages or latent_c != cfg.latent_channels:
        raise BitstreamError(
            f"stream geometry (stages={stages}, latent={latent_c}) does not match model "
            f"(stages={cfg.stages}, latent={cfg.latent_channels})"
        )
    if n_planes not in (1, 3):
        raise BitstreamError(f"invalid plane count {n_planes}")
    h = (bs.height + pad_b) // cfg.factor
    w = (bs.width + pad_r) // cfg.factor
    if (bs.height + pad_b) % cfg.factor or (bs.width + pad_r) % cfg.factor:
        raise BitstreamError("padding in header inconsistent with stage count")
    pr = ByteReader(read_payload(r))
    latents = []
    for _ in range(n_planes):
        qp, basis, count = read_latent_section(pr, with_pca=True)
        if count != latent_c * h * w:
            raise BitstreamError(f"symbol count {count} != {latent_c}x{h}x{w}")
        data = pr.get_bytes(pr.get("I"))
        latents.append(decode_latent(data, qp, basis, (latent_c, h, w)))
    if pr.remaining():
        raise BitstreamError("trailing bytes in CAE payload")
    model.eval()
    planes = _synthesize(model, latents, pad_r, pad_b)
    return _assemble(planes, "Gray" if n_planes == 1 else "YCbCr")
