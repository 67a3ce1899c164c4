"""Tensors, reverse-mode differentiation, and Adam."""
from . import backend
from .gradcheck import fd_gradcheck
from .ops import (
    add,
    affine,
    batchnorm1d,
    conv1d,
    exp,
    flatten,
    l2_normalize,
    log,
    matmul,
    maxpool_axis,
    mean,
    mul,
    relu,
    reshape,
    softmax,
    softmax_cross_entropy,
    sum_,
    transpose,
)
from .optim import Adam, AdamState, NonFiniteGradient, adam_step
from .tensor import Tape, TapeError, Tensor, backward, current_tape, no_grad, reset_tape, tensor

__all__ = [
    "Adam", "AdamState", "NonFiniteGradient", "Tape", "TapeError", "Tensor",
    "adam_step", "add", "affine", "backend", "backward", "batchnorm1d", "conv1d",
    "current_tape", "exp", "fd_gradcheck", "flatten", "l2_normalize", "log", "matmul",
    "maxpool_axis", "mean", "mul", "no_grad", "relu", "reset_tape", "reshape",
    "softmax", "softmax_cross_entropy", "sum_", "tensor", "transpose",
]
