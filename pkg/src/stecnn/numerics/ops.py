"""Differentiable operations on :class:`Tensor`."""
import logging

import numpy as np

from . import backend
from .tensor import Function, Tensor

logger = logging.getLogger(__name__)

PADDING_MODES = ("circular", "zero")


def _unbroadcast(grad, shape):
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Add(Function):
    def forward(self, a, b):
        self.shapes = a.shape, b.shape
        return a + b

    def backward(self, g):
        return _unbroadcast(g, self.shapes[0]), _unbroadcast(g, self.shapes[1])


class Neg(Function):
    def forward(self, a):
        return -a

    def backward(self, g):
        return (-g,)


class Mul(Function):
    def forward(self, a, b):
        self.a, self.b = a, b
        return a * b

    def backward(self, g):
        return _unbroadcast(g * self.b, self.a.shape), _unbroadcast(g * self.a, self.b.shape)


class Reciprocal(Function):
    def forward(self, a):
        self.out = 1.0 / a
        return self.out

    def backward(self, g):
        return (-g * self.out * self.out,)


class Exp(Function):
    def forward(self, a):
        self.out = np.exp(a)
        return self.out

    def backward(self, g):
        return (g * self.out,)


class Log(Function):
    def forward(self, a):
        self.a = a
        return np.log(a)

    def backward(self, g):
        return (g / self.a,)


class MatMul(Function):
    def forward(self, a, b):
        if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
            raise ValueError(f"matmul shape mismatch: {a.shape} @ {b.shape}")
        self.a, self.b = a, b
        return a @ b

    def backward(self, g):
        return g @ self.b.T, self.a.T @ g


class Affine(Function):
    def forward(self, x, w, b):
        if x.ndim != 2 or w.ndim != 2 or x.shape[1] != w.shape[0] or b.shape != (w.shape[1],):
            raise ValueError(f"affine dimension mismatch: x{x.shape} W{w.shape} b{b.shape}")
        self.x, self.w = x, w
        return x @ w + b

    def backward(self, g):
        return g @ self.w.T, self.x.T @ g, g.sum(axis=0)


class Sum(Function):
    def forward(self, a, axis=None):
        self.shape, self.axis = a.shape, axis
        return np.asarray(a.sum(axis=axis))

    def backward(self, g):
        if self.axis is not None:
            g = np.expand_dims(g, self.axis)
        return (np.broadcast_to(g, self.shape).copy(),)


class Mean(Function):
    def forward(self, a, axis=None):
        self.shape, self.axis = a.shape, axis
        self.count = a.size if axis is None else a.shape[axis]
        return np.asarray(a.mean(axis=axis))

    def backward(self, g):
        if self.axis is not None:
            g = np.expand_dims(g, self.axis)
        return (np.broadcast_to(g / self.count, self.shape).copy(),)


class Reshape(Function):
    def forward(self, a, shape=None):
        self.shape = a.shape
        return a.reshape(shape)

    def backward(self, g):
        return (g.reshape(self.shape),)


class Transpose(Function):
    def forward(self, a, axes=None):
        self.axes = axes
        return np.transpose(a, axes)

    def backward(self, g):
        inv = None if self.axes is None else np.argsort(self.axes)
        return (np.transpose(g, inv),)


class Relu(Function):
    def forward(self, a):
        self.mask = a > 0
        return a * self.mask

    def backward(self, g):
        return (g * self.mask,)


class MaxAxis(Function):
    def forward(self, a, axis=0):
        if not -a.ndim <= axis < a.ndim:
            raise ValueError(f"invalid axis {axis} for {a.ndim}-d tensor")
        self.shape, self.axis = a.shape, axis
        # argmax returns the first maximal index; gradient is routed there on ties
        self.idx = np.expand_dims(np.argmax(a, axis=axis), axis)
        return np.take_along_axis(a, self.idx, axis=axis).squeeze(axis)

    def backward(self, g):
        out = np.zeros(self.shape, dtype=g.dtype)
        np.put_along_axis(out, self.idx, np.expand_dims(g, self.axis), axis=self.axis)
        return (out,)


class L2Normalize(Function):
    def forward(self, a, axis=-1, eps=1e-12):
        self.axis = axis
        self.norm = np.maximum(np.sqrt((a * a).sum(axis=axis, keepdims=True)), eps)
        self.out = a / self.norm
        return self.out

    def backward(self, g):
        dot = (g * self.out).sum(axis=self.axis, keepdims=True)
        return ((g - self.out * dot) / self.norm,)


class SoftmaxCrossEntropy(Function):
    def forward(self, logits, labels=None):
        if logits.ndim != 2:
            raise ValueError(f"logits must be (batch, classes), got {logits.shape}")
        labels = np.asarray(labels)
        B, K = logits.shape
        if labels.shape != (B,):
            raise ValueError(f"labels shape {labels.shape} does not match batch {B}")
        if labels.size and (labels.min() < 0 or labels.max() >= K):
            raise ValueError(f"label out of range [0, {K})")
        shifted = logits - logits.max(axis=1, keepdims=True)
        logsum = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
        logp = shifted - logsum
        self.prob = np.exp(logp)
        self.labels = labels
        return np.asarray(-logp[np.arange(B), labels].mean(), dtype=logits.dtype)

    def backward(self, g):
        B = self.prob.shape[0]
        d = self.prob.copy()
        d[np.arange(B), self.labels] -= 1.0
        return (d * (g / B),)


class BatchNorm(Function):
    def forward(self, x, gamma, beta, running_mean=None, running_var=None,
                training=True, momentum=0.1, eps=1e-5):
        C = x.shape[1]
        self.axes = tuple(i for i in range(x.ndim) if i != 1)
        bshape = [1] * x.ndim
        bshape[1] = C
        self.bshape = tuple(bshape)
        self.training = training
        if training:
            n = x.size // C
            if n == 1:
                logger.warning("batchnorm in train mode with a single value per channel")
            mu = x.mean(axis=self.axes)
            var = x.var(axis=self.axes)
            if running_mean is not None:
                unbiased = var * n / (n - 1) if n > 1 else var
                running_mean *= 1 - momentum
                running_mean += momentum * mu
                running_var *= 1 - momentum
                running_var += momentum * unbiased
        else:
            mu, var = running_mean, running_var
        self.invstd = (1.0 / np.sqrt(var + eps)).astype(x.dtype).reshape(self.bshape)
        self.xhat = (x - mu.reshape(self.bshape)) * self.invstd
        self.gamma = gamma.reshape(self.bshape)
        return self.xhat * self.gamma + beta.reshape(self.bshape)

    def backward(self, g):
        dgamma = (g * self.xhat).sum(axis=self.axes)
        dbeta = g.sum(axis=self.axes)
        dxhat = g * self.gamma
        if self.training:
            n = g.size // g.shape[1]
            dx = self.invstd / n * (
                n * dxhat
                - dxhat.sum(axis=self.axes, keepdims=True)
                - self.xhat * (dxhat * self.xhat).sum(axis=self.axes, keepdims=True)
            )
        else:
            dx = dxhat * self.invstd
        return dx, dgamma, dbeta


def check_padding(padding):
    if padding not in PADDING_MODES:
        raise ValueError(f"padding must be one of {PADDING_MODES}, got {padding!r}")
    return padding == "circular"


class Conv1d(Function):
    def forward(self, x, w, dilation=1, padding="circular"):
        if x.ndim != 3 or w.ndim != 3:
            raise ValueError(f"conv1d expects x[B,Cin,L] and w[Cout,Cin,K], got {x.shape}, {w.shape}")
        if x.shape[1] != w.shape[1]:
            raise ValueError(f"conv1d channel mismatch: input has {x.shape[1]}, kernel expects {w.shape[1]}")
        support = (w.shape[2] - 1) * dilation + 1
        if support > x.shape[2]:
            raise ValueError(f"kernel support {support} exceeds signal length {x.shape[2]}")
        self.circular = check_padding(padding)
        self.dilation = dilation
        self.x, self.w = x, w
        return backend.conv1d_forward(x, w, dilation, self.circular)

    def backward(self, g):
        return backend.conv1d_backward(self.x, self.w, g, self.dilation, self.circular)


def add(a, b):
    return Add.apply(a, b)


def neg(a):
    return Neg.apply(a)


def mul(a, b):
    return Mul.apply(a, b)


def reciprocal(a):
    return Reciprocal.apply(a)


def exp(a):
    return Exp.apply(a)


def log(a):
    return Log.apply(a)


def matmul(a, b):
    return MatMul.apply(a, b)


def affine(x, w, b):
    """``x @ w + b`` for x[B,D], w[D,E], b[E]."""
    return Affine.apply(x, w, b)


def sum_(a, axis=None):
    return Sum.apply(a, axis=axis)


def mean(a, axis=None):
    return Mean.apply(a, axis=axis)


def reshape(a, shape):
    return Reshape.apply(a, shape=tuple(shape))


def flatten(a):
    return reshape(a, (a.shape[0], -1))


def transpose(a, axes=None):
    return Transpose.apply(a, axes=axes)


def relu(a):
    return Relu.apply(a)


def maxpool_axis(a, axis):
    """Max over ``axis``, removing it. Gradient goes to the first maximum."""
    return MaxAxis.apply(a, axis=axis)


def l2_normalize(a, axis=-1):
    return L2Normalize.apply(a, axis=axis)


def softmax_cross_entropy(logits, labels):
    """Mean negative log-softmax of the labelled class."""
    return SoftmaxCrossEntropy.apply(logits, labels=np.asarray(labels, dtype=np.int64))


def batchnorm1d(x, gamma, beta, running_mean=None, running_var=None, mode="train",
                momentum=0.1, eps=1e-5):
    """Per-channel (axis 1) normalization over every other axis.

    In train mode batch statistics are used and the running arrays, when
    given, are updated in place. Eval mode uses the running arrays.
    """
    if mode not in ("train", "eval"):
        raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
    if mode == "eval" and (running_mean is None or running_var is None):
        raise ValueError("eval-mode batchnorm needs running statistics")
    return BatchNorm.apply(x, gamma, beta, running_mean=running_mean, running_var=running_var,
                           training=mode == "train", momentum=momentum, eps=eps)


def conv1d(x, w, padding="circular", dilation=1):
    """Same-length cross-correlation ``y[b,o,u] = sum_{c,k} w[o,c,k] x[b,c,u+k*dilation]``."""
    return Conv1d.apply(x, w, dilation=dilation, padding=padding)


def softmax(logits, axis=-1):
    """Plain (non-differentiable) softmax on arrays or tensors."""
    a = logits.data if isinstance(logits, Tensor) else np.asarray(logits)
    e = np.exp(a - a.max(axis=axis, keepdims=True))
    return e / e.sum(axis=axis, keepdims=True)
