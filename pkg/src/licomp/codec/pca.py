"""Channel decorrelation by PCA (per-location channel vectors)."""

from dataclasses import dataclass

import numpy as np

from licomp.codec.image import FeatureBlock
from licomp.errors import DimensionError


@dataclass
class PcaBasis:
    """Rows of ``basis`` are eigenvectors, ordered by descending eigenvalue."""

    mean: np.ndarray
    basis: np.ndarray
    eigenvalues: np.ndarray

    @property
    def dim(self):
        return self.mean.shape[0]

    @classmethod
    def identity(cls, dim, mean=None):
        mean = np.zeros(dim) if mean is None else np.asarray(mean, dtype=np.float64)
        return cls(mean, np.eye(dim), np.zeros(dim))

    def as_stored(self):
        """Round mean and basis through float32, exactly as the container keeps them."""
        return PcaBasis(
            self.mean.astype(np.float32).astype(np.float64),
            self.basis.astype(np.float32).astype(np.float64),
            self.eigenvalues,
        )


def pca_fit(samples):
    """Fit a basis to ``samples`` of shape (n, C); needs n > C.

    Each eigenvector's largest-magnitude component is made positive so the
    fit is deterministic.
    """
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim != 2:
        raise DimensionError(f"samples must be (n, C), got shape {x.shape}")
    n, c = x.shape
    if n <= c:
        raise ValueError(f"pca_fit needs more samples than dimensions ({n} <= {c})")
    if not np.all(np.isfinite(x)):
        raise ValueError("pca_fit got non-finite samples")
    mean = x.mean(axis=0)
    xc = x - mean
    cov = xc.T @ xc / (n - 1)
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals, kind="stable")[::-1]
    evals = np.clip(evals[order], 0.0, None)
    basis = evecs[:, order].T
    lead = np.argmax(np.abs(basis), axis=1)
    signs = np.sign(basis[np.arange(c), lead])
    signs[signs == 0] = 1.0
    basis = basis * signs[:, None]
    return PcaBasis(mean, basis, evals)


def block_samples(fb):
    """(h*w, C) matrix of per-location channel vectors."""
    return fb.values.reshape(fb.channels, -1).T


def pca_apply(fb, basis, direction="forward"):
    if fb.channels != basis.dim:
        raise DimensionError(f"feature block has {fb.channels} channels, basis has dim {basis.dim}")
    v = fb.values.reshape(fb.channels, -1).astype(np.float64)
    if direction == "forward":
        out = basis.basis @ (v - basis.mean[:, None])
    elif direction == "inverse":
        out = basis.basis.T @ v + basis.mean[:, None]
    else:
        raise ValueError(f"direction must be 'forward' or 'inverse', got {direction!r}")
    return FeatureBlock(out.reshape(fb.values.shape))
