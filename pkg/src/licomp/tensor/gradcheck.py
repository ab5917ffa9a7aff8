"""Central finite-difference checks against the analytic backward pass."""

import numpy as np

from licomp.tensor.core import backward, no_grad


def numerical_grad(fn, leaf, h=1e-4, max_entries=None, rng=None):
    """Central differences of scalar ``fn()`` w.r.t. ``leaf.data``.

    With ``max_entries`` only a random subset of coordinates is probed; the
    rest are returned as NaN.
    """
    flat = leaf.data.reshape(-1)
    idx = np.arange(flat.size)
    if max_entries is not None and flat.size > max_entries:
        rng = rng if rng is not None else np.random.default_rng(0)
        idx = np.sort(rng.choice(flat.size, size=max_entries, replace=False))
    out = np.full(flat.size, np.nan)
    with no_grad():
        for i in idx:
            orig = flat[i]
            flat[i] = orig + h
            fp = float(fn().data)
            flat[i] = orig - h
            fm = float(fn().data)
            flat[i] = orig
            out[i] = (fp - fm) / (2.0 * h)
    return out.reshape(leaf.shape)


def relative_error(analytic, numeric):
    mask = ~np.isnan(numeric)
    a, n = analytic[mask], numeric[mask]
    denom = max(np.linalg.norm(a), np.linalg.norm(n), 1e-12)
    return float(np.linalg.norm(a - n) / denom)


def check_gradients(fn, leaves, h=1e-4, max_entries=None, seed=0):
    """Return the worst norm-wise relative error over ``leaves``.

    ``leaves`` must be float64 tensors with ``requires_grad``; their ``.grad``
    is reset before the analytic pass.
    """
    for leaf in leaves:
        leaf.grad = np.zeros_like(leaf.data)
    backward(fn())
    analytic = [leaf.grad.copy() for leaf in leaves]
    rng = np.random.default_rng(seed)
    worst = 0.0
    for leaf, a in zip(leaves, analytic):
        n = numerical_grad(fn, leaf, h, max_entries, rng)
        worst = max(worst, relative_error(a, n))
    return worst
