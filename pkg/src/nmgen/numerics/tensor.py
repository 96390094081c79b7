"""Dense float32 tensors with tape-based reverse-mode differentiation.

Operations record themselves on the active :class:`Tape` (if any). Outside a
tape context they are plain numpy computations, which is what inference uses.
"""
from __future__ import annotations

import numpy as np

DTYPE = np.float32

_active_tape: "Tape | None" = None


class ShapeMismatch(ValueError):
    pass


class NotScalarLoss(ValueError):
    pass


class NonFiniteError(FloatingPointError):
    pass


# flipped by tests / the CLI's --debug flag
DEBUG = False


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "name", "_parents", "_backward")

    def __init__(self, data, requires_grad=False, name=None):
        self.data = np.asarray(data, dtype=DTYPE)
        self.requires_grad = requires_grad
        self.grad = None
        self.name = name
        self._parents = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    def numpy(self):
        return self.data

    def item(self):
        return float(self.data.reshape(-1)[0])

    def __repr__(self):
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{label})"


class Tape:
    """Records operations in execution order; backward replays them reversed.

    Use as a context manager: ops created inside the ``with`` block are
    recorded. Tapes do not nest.
    """

    def __init__(self):
        self.nodes = []

    def __enter__(self):
        global _active_tape
        if _active_tape is not None:
            raise RuntimeError("a tape is already active")
        _active_tape = self
        return self

    def __exit__(self, *exc):
        global _active_tape
        _active_tape = None
        return False

    def backward(self, loss, params=None):
        return backward(self, loss, params)


def constant(data):
    return data if isinstance(data, Tensor) else Tensor(data)


def _result(data, parents, backward_fn):
    out = Tensor(data)
    if DEBUG and not np.all(np.isfinite(out.data)):
        raise NonFiniteError("non-finite value produced")
    tape = _active_tape
    if tape is not None and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._backward = backward_fn
        tape.nodes.append(out)
    return out


def _accumulate(t, g):
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.array(g, dtype=DTYPE, copy=True)
    else:
        t.grad += g


def backward(tape, loss, params=None):
    """Populate ``.grad`` for every tensor reachable from ``loss``.

    Returns the gradients of ``params`` (zeros for parameters that did not
    influence the loss) when ``params`` is given.
    """
    if loss.data.size != 1:
        raise NotScalarLoss(f"loss must be scalar, got shape {loss.shape}")
    for node in tape.nodes:
        node.grad = None
        for parent in node._parents:
            parent.grad = None
    if params is not None:
        for p in params:
            p.grad = None
    loss.grad = np.ones_like(loss.data)
    for node in reversed(tape.nodes):
        if node.grad is not None:
            node._backward(node.grad)
    if params is None:
        return None
    return [p.grad if p.grad is not None else np.zeros_like(p.data) for p in params]


def _check_same(a, b, op):
    if a.shape != b.shape:
        raise ShapeMismatch(f"{op}: {a.shape} vs {b.shape}")


def _sum_to(g, shape):
    # reduce a broadcast bias gradient back to the bias shape
    if g.shape == shape:
        return g
    return g.sum(axis=0).reshape(shape)


def _is_bias(a, b):
    if a.ndim != 2:
        return False
    return (b.ndim == 1 and b.shape[0] == a.shape[1]) or (
        b.ndim == 2 and b.shape[0] == 1 and b.shape[1] == a.shape[1]
    )


def add(a, b):
    """Elementwise sum; ``b`` may also be a row bias broadcast over ``a``."""
    a, b = constant(a), constant(b)
    if a.shape != b.shape and not _is_bias(a.data, b.data):
        raise ShapeMismatch(f"add: {a.shape} vs {b.shape}")

    def bw(g):
        _accumulate(a, g)
        _accumulate(b, _sum_to(g, b.shape))

    return _result(a.data + b.data, (a, b), bw)


def sub(a, b):
    a, b = constant(a), constant(b)
    if a.shape != b.shape and not _is_bias(a.data, b.data):
        raise ShapeMismatch(f"sub: {a.shape} vs {b.shape}")

    def bw(g):
        _accumulate(a, g)
        _accumulate(b, -_sum_to(g, b.shape))

    return _result(a.data - b.data, (a, b), bw)


def mul(a, b):
    a, b = constant(a), constant(b)
    _check_same(a, b, "mul")

    def bw(g):
        _accumulate(a, g * b.data)
        _accumulate(b, g * a.data)

    return _result(a.data * b.data, (a, b), bw)


def scale(a, s):
    """Multiply by a python scalar."""
    s = float(s)

    def bw(g):
        _accumulate(a, g * DTYPE(s))

    return _result(a.data * DTYPE(s), (a,), bw)


def matmul(a, b):
    a, b = constant(a), constant(b)
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeMismatch(f"matmul: {a.shape} @ {b.shape}")

    def bw(g):
        if a.requires_grad:
            _accumulate(a, g @ b.data.T)
        if b.requires_grad:
            _accumulate(b, a.data.T @ g)

    return _result(a.data @ b.data, (a, b), bw)


def concat(tensors, axis=1):
    tensors = [constant(t) for t in tensors]
    try:
        data = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError as exc:
        raise ShapeMismatch(f"concat: {exc}") from None
    bounds = np.cumsum([0] + [t.shape[axis] for t in tensors])

    def bw(g):
        for t, lo, hi in zip(tensors, bounds[:-1], bounds[1:]):
            if t.requires_grad:
                idx = [slice(None)] * g.ndim
                idx[axis] = slice(lo, hi)
                _accumulate(t, g[tuple(idx)])

    return _result(data, tuple(tensors), bw)


def slice_cols(a, lo, hi):
    def bw(g):
        full = np.zeros_like(a.data)
        full[:, lo:hi] = g
        _accumulate(a, full)

    return _result(a.data[:, lo:hi], (a,), bw)


def embedding_lookup(table, ids):
    ids = np.asarray(ids, dtype=np.int64)
    if ids.ndim != 1:
        raise ShapeMismatch("embedding_lookup expects a 1-d id array")
    if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
        raise IndexError("embedding id out of range")

    def bw(g):
        full = np.zeros_like(table.data)
        np.add.at(full, ids, g)
        _accumulate(table, full)

    return _result(table.data[ids], (table,), bw)


def sigmoid(a):
    out = 0.5 * (1.0 + np.tanh(0.5 * a.data))

    def bw(g):
        _accumulate(a, g * out * (1.0 - out))

    return _result(out, (a,), bw)


def log_sigmoid(a):
    x = a.data
    out = -np.logaddexp(DTYPE(0), -x)

    def bw(g):
        _accumulate(a, g * (1.0 - 0.5 * (1.0 + np.tanh(0.5 * x))))

    return _result(out.astype(DTYPE), (a,), bw)


def tanh(a):
    out = np.tanh(a.data)

    def bw(g):
        _accumulate(a, g * (1.0 - out * out))

    return _result(out, (a,), bw)


def _softmax_np(x):
    z = x - x.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def softmax(a):
    out = _softmax_np(a.data)

    def bw(g):
        _accumulate(a, out * (g - (g * out).sum(axis=-1, keepdims=True)))

    return _result(out, (a,), bw)


def log_softmax(a):
    z = a.data - a.data.max(axis=-1, keepdims=True)
    out = z - np.log(np.exp(z).sum(axis=-1, keepdims=True))

    def bw(g):
        p = np.exp(out)
        _accumulate(a, g - p * g.sum(axis=-1, keepdims=True))

    return _result(out, (a,), bw)


def clamp_min(a, floor):
    """Elementwise max with a constant; no gradient flows where clamped."""
    keep = a.data >= floor

    def bw(g):
        _accumulate(a, g * keep)

    return _result(np.where(keep, a.data, DTYPE(floor)), (a,), bw)


def power_series(p, exponents):
    """Row vector ``p ** exponents`` for a scalar parameter ``p`` of shape (1,)."""
    k = np.asarray(exponents, dtype=DTYPE)
    base = p.data.reshape(-1)[0]
    out = (base ** k).reshape(1, -1).astype(DTYPE)

    def bw(g):
        deriv = np.where(k > 0, k * base ** np.maximum(k - 1, 0), 0.0)
        _accumulate(p, np.array([(g.reshape(-1) * deriv).sum()], dtype=DTYPE).reshape(p.shape))

    return _result(out, (p,), bw)


def sum(a):  # noqa: A001 - mirrors the numpy name on purpose
    def bw(g):
        _accumulate(a, np.broadcast_to(g.reshape(()), a.shape))

    return _result(np.array(a.data.sum(), dtype=DTYPE), (a,), bw)


def mean(a):
    n = max(a.data.size, 1)

    def bw(g):
        _accumulate(a, np.broadcast_to(g.reshape(()) / DTYPE(n), a.shape))

    return _result(np.array(a.data.mean(), dtype=DTYPE), (a,), bw)
