"""Minimal module system: named parameters, buffers, train/eval modes."""
import math
from collections import OrderedDict

import numpy as np

from .numerics import ops
from .numerics.tensor import DEFAULT_DTYPE, Tensor


class Module:
    def __init__(self):
        object.__setattr__(self, "_params", OrderedDict())
        object.__setattr__(self, "_children", OrderedDict())
        object.__setattr__(self, "_buffers", OrderedDict())
        object.__setattr__(self, "training", True)

    def __setattr__(self, name, value):
        if isinstance(value, Module):
            self._children[name] = value
        elif isinstance(value, Tensor) and value.requires_grad:
            self._params[name] = value
        object.__setattr__(self, name, value)

    def register_buffer(self, name, array):
        self._buffers[name] = array
        object.__setattr__(self, name, array)

    def named_parameters(self, prefix=""):
        for name, p in self._params.items():
            yield prefix + name, p
        for cname, child in self._children.items():
            yield from child.named_parameters(prefix + cname + ".")

    def parameters(self):
        return OrderedDict(self.named_parameters())

    def named_buffers(self, prefix=""):
        for name, b in self._buffers.items():
            yield prefix + name, b
        for cname, child in self._children.items():
            yield from child.named_buffers(prefix + cname + ".")

    def named_modules(self, prefix=""):
        yield prefix.rstrip("."), self
        for cname, child in self._children.items():
            yield from child.named_modules(prefix + cname + ".")

    def num_parameters(self):
        return sum(p.size for _, p in self.named_parameters())

    def state_dict(self):
        state = OrderedDict((k, p.data.copy()) for k, p in self.named_parameters())
        state.update((k, b.copy()) for k, b in self.named_buffers())
        return state

    def _slots(self):
        slots = OrderedDict((k, p.data) for k, p in self.named_parameters())
        slots.update(self.named_buffers())
        return slots

    def load_state_dict(self, state, strict=True):
        """Copy arrays into this module by name.

        With ``strict`` every name must match in both directions. Shapes must
        always match. Raises ``KeyError``/``ValueError`` naming the tensor.
        """
        slots = self._slots()
        for name, arr in state.items():
            if name not in slots:
                if strict:
                    raise KeyError(f"unknown tensor {name!r}")
                continue
            if slots[name].shape != np.shape(arr):
                raise ValueError(f"shape mismatch for {name!r}: model {slots[name].shape}, state {np.shape(arr)}")
        if strict:
            missing = [k for k in slots if k not in state]
            if missing:
                raise KeyError(f"missing tensor {missing[0]!r}")
        for name, arr in state.items():
            if name in slots:
                slots[name][...] = arr

    def train(self, mode=True):
        for _, m in self.named_modules():
            object.__setattr__(m, "training", mode)
        return self

    def eval(self):
        return self.train(False)

    def forward(self, *args):
        raise NotImplementedError

    def __call__(self, *args):
        return self.forward(*args)


class Sequential(Module):
    def __init__(self, *modules):
        super().__init__()
        for i, m in enumerate(modules):
            setattr(self, str(i), m)

    def __iter__(self):
        return iter(self._children.values())

    def __len__(self):
        return len(self._children)

    def __getitem__(self, i):
        return list(self._children.values())[i]

    def forward(self, x):
        for m in self._children.values():
            x = m(x)
        return x


def uniform_init(rng, shape, fan_in, dtype):
    """Fan-in scaled uniform, bound sqrt(1/fan_in)."""
    bound = math.sqrt(1.0 / fan_in)
    return Tensor(rng.uniform(-bound, bound, size=shape).astype(dtype), requires_grad=True, dtype=dtype)


def zeros_param(shape, dtype):
    return Tensor(np.zeros(shape, dtype=dtype), requires_grad=True, dtype=dtype)


class Linear(Module):
    def __init__(self, in_features, out_features, rng, dtype=DEFAULT_DTYPE, zero_init=False):
        super().__init__()
        if zero_init:
            self.weight = zeros_param((in_features, out_features), dtype)
            self.bias = zeros_param((out_features,), dtype)
        else:
            self.weight = uniform_init(rng, (in_features, out_features), in_features, dtype)
            self.bias = uniform_init(rng, (out_features,), in_features, dtype)

    def forward(self, x):
        return ops.affine(x, self.weight, self.bias)


class BatchNorm(Module):
    """Per-channel batch normalization over every axis except axis 1."""

    def __init__(self, channels, dtype=DEFAULT_DTYPE, momentum=0.1, eps=1e-5):
        super().__init__()
        self.gamma = Tensor(np.ones(channels, dtype=dtype), requires_grad=True, dtype=dtype)
        self.beta = zeros_param((channels,), dtype)
        self.register_buffer("running_mean", np.zeros(channels, dtype=dtype))
        self.register_buffer("running_var", np.ones(channels, dtype=dtype))
        self.momentum = momentum
        self.eps = eps

    def forward(self, x):
        return ops.batchnorm1d(x, self.gamma, self.beta, self.running_mean, self.running_var,
                               mode="train" if self.training else "eval",
                               momentum=self.momentum, eps=self.eps)


class ReLU(Module):
    def forward(self, x):
        return ops.relu(x)


class Flatten(Module):
    def forward(self, x):
        return ops.flatten(x)


class Conv1d(Module):
    """Bias-free same-length conv1d (batch normalization follows it)."""

    def __init__(self, in_channels, out_channels, kernel_size, rng, padding="circular",
                 dtype=DEFAULT_DTYPE):
        super().__init__()
        self.weight = uniform_init(rng, (out_channels, in_channels, kernel_size),
                                   in_channels * kernel_size, dtype)
        self.padding = padding

    def forward(self, x):
        return ops.conv1d(x, self.weight, padding=self.padding)


class MaxOverAxis(Module):
    def __init__(self, axis):
        super().__init__()
        self.axis = axis

    def forward(self, x):
        return ops.maxpool_axis(x, self.axis)
