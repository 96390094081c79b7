"""Adam, global-norm clipping and the step learning-rate schedule."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import DTYPE, ShapeMismatch


def clip_global_norm(grads, max_norm):
    """Scale ``grads`` so that their joint L2 norm is at most ``max_norm``.

    Returns ``(clipped, norm_before)``. Gradients are left untouched when the
    norm is already within bounds.
    """
    if max_norm <= 0:
        raise ValueError("max_norm must be positive")
    total = float(np.sqrt(sum(float(np.sum(np.square(g, dtype=np.float64))) for g in grads)))
    if total <= max_norm or total == 0.0:
        return list(grads), total
    factor = DTYPE(max_norm / total)
    return [g * factor for g in grads], total


def step_lr(base_lr, epoch, halve_every=20, factor=0.5):
    """Learning rate after ``epoch`` epochs of step decay."""
    if halve_every <= 0:
        return base_lr
    return base_lr * factor ** (epoch // halve_every)


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    @classmethod
    def for_params(cls, params, lr=1e-3, **kw):
        return cls(
            lr=lr,
            m=[np.zeros_like(p.data) for p in params],
            v=[np.zeros_like(p.data) for p in params],
            **kw,
        )


def adam_step(state, params, grads):
    """In-place Adam update with bias correction. Returns ``params``."""
    if not (len(params) == len(grads) == len(state.m)):
        raise ShapeMismatch("params, grads and moments differ in length")
    state.step_count += 1
    t = state.step_count
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**t
    c2 = 1.0 - b2**t
    step = DTYPE(state.lr / c1)
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape or m.shape != p.shape:
            raise ShapeMismatch(f"adam: {p.shape} vs {g.shape}")
        m *= DTYPE(b1)
        m += DTYPE(1.0 - b1) * g
        v *= DTYPE(b2)
        v += DTYPE(1.0 - b2) * (g * g)
        denom = np.sqrt(v / DTYPE(c2)) + DTYPE(state.eps)
        p.data -= step * m / denom
    return params
