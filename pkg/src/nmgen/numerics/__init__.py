"""Minimal dense tensor engine: ops, reverse-mode autodiff, Adam."""
from .gradcheck import check_gradients, numeric_grad
from .optim import AdamState, adam_step, clip_global_norm, step_lr
from .tensor import (
    DTYPE,
    NonFiniteError,
    NotScalarLoss,
    ShapeMismatch,
    Tape,
    Tensor,
    add,
    backward,
    clamp_min,
    concat,
    constant,
    embedding_lookup,
    log_sigmoid,
    log_softmax,
    matmul,
    mean,
    mul,
    power_series,
    scale,
    sigmoid,
    slice_cols,
    softmax,
    sub,
    sum,
    tanh,
)

__all__ = [
    "DTYPE", "NonFiniteError", "NotScalarLoss", "ShapeMismatch", "Tape", "Tensor",
    "AdamState", "adam_step", "clip_global_norm", "step_lr",
    "check_gradients", "numeric_grad",
    "add", "backward", "clamp_min", "concat", "constant", "embedding_lookup",
    "log_sigmoid", "log_softmax", "matmul", "mean", "mul", "power_series", "scale",
    "sigmoid", "slice_cols", "softmax", "sub", "sum", "tanh",
]
