"""Central finite-difference gradient verification."""
from __future__ import annotations

import numpy as np

from .tensor import DTYPE, Tape, backward


def numeric_grad(loss_fn, param, eps=1e-3):
    """Central differences of ``loss_fn()`` w.r.t. every entry of ``param``."""
    grad = np.zeros(param.shape, dtype=np.float64)
    flat = param.data.reshape(-1)
    out = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + DTYPE(eps)
        hi_x = float(flat[i])
        up = float(loss_fn().data)
        flat[i] = orig - DTYPE(eps)
        lo_x = float(flat[i])
        down = float(loss_fn().data)
        flat[i] = orig
        out[i] = (up - down) / (hi_x - lo_x)
    return grad


def check_gradients(loss_fn, params, eps=1e-3):
    """Max of ``|autodiff - fd| / max(1, |fd|)`` over all entries of ``params``.

    ``loss_fn`` must build its graph from scratch on each call.
    """
    with Tape() as tape:
        loss = loss_fn()
    analytic = backward(tape, loss, params)
    worst = 0.0
    for p, g in zip(params, analytic):
        fd = numeric_grad(loss_fn, p, eps)
        err = np.abs(g.astype(np.float64) - fd) / np.maximum(1.0, np.abs(fd))
        if err.size:
            worst = max(worst, float(err.max()))
    return worst
