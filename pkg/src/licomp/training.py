"""Seeded training loops shared by the CLI and the acceptance suite."""

import csv
from pathlib import Path

import numpy as np

from licomp.cae import CaeConfig, CaeModel, cae_train_step
from licomp.data import sample_patches
from licomp.gan import GanConfig, GanModel, gan_optimizers, gan_train_step
from licomp.sr.srcnn import SrcnnModel, make_sr_pairs, srcnn_train_step
from licomp.tensor import Adam

LOG_FIELDS = ("step", "loss", "aux")


class LossLog:
    """Append-only CSV of (step, loss, aux); the header is written once per file."""

    def __init__(self, path):
        self.path = Path(path) if path else None
        if self.path and (not self.path.exists() or self.path.stat().st_size == 0):
            with self.path.open("w", newline="") as fh:
                csv.writer(fh).writerow(LOG_FIELDS)

    def __call__(self, step, loss, aux=""):
        if self.path is None:
            return
        with self.path.open("a", newline="") as fh:
            csv.writer(fh).writerow((step, f"{loss:.8g}", aux if aux == "" else f"{aux:.8g}"))


def train_cae(images, steps, config=None, batch=8, patch=32, lr=1e-4, seed=0, log=None, pool=512):
    """Adam on seeded single-plane crops; a fresh crop pool is drawn every ``pool`` steps."""
    model = CaeModel(config or CaeConfig(seed=seed))
    if patch % model.config.factor:
        raise ValueError(f"patch {patch} must be a multiple of {model.config.factor}")
    opt = Adam(model.params(), lr=lr)
    rng = np.random.default_rng(seed)
    data = None
    for step in range(steps):
        if step % pool == 0:
            data = sample_patches(images, patch, pool, seed + step, mode="cae")
        idx = rng.integers(0, len(data), size=batch)
        loss = cae_train_step(model, data[idx], opt, rng)
        if log:
            log(step, loss)
    return model.eval()


def train_gan(images, steps, config=None, batch=1, lr=1e-4, seed=0, log=None, pool=256):
    cfg = config or GanConfig(seed=seed)
    model = GanModel(cfg)
    opts = gan_optimizers(model, lr=lr)
    rng = np.random.default_rng(seed)
    data = None
    for step in range(steps):
        if step % pool == 0:
            data = sample_patches(images, cfg.tile, pool, seed + step, mode="gan")
        idx = rng.integers(0, len(data), size=batch)
        g_loss, d_loss = gan_train_step(model, data[idx], opts)
        if log:
            log(step, g_loss, d_loss)
    return model.eval()


def train_srcnn(images, steps, init="identity+noise", batch=16, patch=24, lr=1e-4, seed=0, log=None,
                pool=500):
    model = SrcnnModel(init=init, seed=seed)
    opt = Adam(model.params(), lr=lr)
    rng = np.random.default_rng(seed)
    inputs, targets = make_sr_pairs(images, patch, pool, seed)
    for step in range(steps):
        idx = rng.integers(0, pool, size=batch)
        loss = srcnn_train_step(model, inputs[idx], targets[idx], opt)
        if log:
            log(step, loss)
    return model.eval()
