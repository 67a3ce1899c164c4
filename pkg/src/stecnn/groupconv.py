"""Scale-translation group convolutions on 1D signals.

Scales are dyadic, ``2**j`` for ``j`` in ``[0, S)``, and a kernel is scaled by
integer dilation (zero insertion). Feature maps on the lifted domain have
axes ``(batch, channel, scale, position)``.
"""
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import nn
from .numerics import backend, ops
from .numerics.tensor import DEFAULT_DTYPE, Function, Tensor


@dataclass(frozen=True)
class ScaleGrid:
    num_scales: int = 3

    def __post_init__(self):
        if self.num_scales < 1:
            raise ValueError("num_scales must be positive")

    @property
    def factors(self):
        return tuple(2 ** j for j in range(self.num_scales))

    def support(self, kernel_size):
        """Dilated kernel length at the largest scale."""
        return (kernel_size - 1) * 2 ** (self.num_scales - 1) + 1


@dataclass(frozen=True)
class GroupElement:
    """Element ``(x, s)`` of the 1D scale-translation group.

    Kept rational so the group axioms hold exactly.
    """

    x: Fraction
    s: Fraction

    def __post_init__(self):
        object.__setattr__(self, "x", Fraction(self.x))
        object.__setattr__(self, "s", Fraction(self.s))
        if self.s <= 0:
            raise ValueError("scale must be positive")

    @classmethod
    def from_index(cls, x, j):
        return cls(Fraction(x), Fraction(2) ** j)

    @classmethod
    def identity(cls):
        return cls(Fraction(0), Fraction(1))

    def __mul__(self, other):
        return GroupElement(self.s * other.x + self.x, self.s * other.s)

    def inverse(self):
        return GroupElement(-self.x / self.s, 1 / self.s)

    def act(self, position):
        """Action on a base-space point: ``s * position + x``."""
        return self.s * Fraction(position) + self.x


def scale_kernel(base, j):
    """Dilate ``base`` along its last axis by ``2**j``: tap m moves to m * 2**j."""
    if j < 0:
        raise ValueError("scale index must be non-negative")
    base = np.asarray(base.data if isinstance(base, Tensor) else base)
    step = 2 ** j
    K = base.shape[-1]
    out = np.zeros(base.shape[:-1] + ((K - 1) * step + 1,), dtype=base.dtype)
    out[..., ::step] = base
    return out


def _check_support(L, K, num_scales, circular):
    support = (K - 1) * 2 ** (num_scales - 1) + 1
    if circular and support > L:
        raise ValueError(f"dilated kernel support {support} at top scale exceeds length {L}")


class Lift(Function):
    def forward(self, x, w, num_scales=3, padding="circular"):
        if x.ndim != 3 or w.ndim != 3 or x.shape[1] != w.shape[1]:
            raise ValueError(f"lift expects x[B,Cin,L], w[Cout,Cin,K], got {x.shape}, {w.shape}")
        self.circular = ops.check_padding(padding)
        _check_support(x.shape[2], w.shape[2], num_scales, self.circular)
        self.x, self.w, self.S = x, w, num_scales
        B, L = x.shape[0], x.shape[2]
        out = np.empty((B, w.shape[0], num_scales, L), dtype=np.result_type(x, w))
        for j in range(num_scales):
            out[:, :, j, :] = backend.conv1d_forward(x, w, 2 ** j, self.circular)
        return out

    def backward(self, g):
        gx = np.zeros(self.x.shape, dtype=g.dtype)
        gw = np.zeros(self.w.shape, dtype=g.dtype)
        for j in range(self.S):
            dx, dw = backend.conv1d_backward(self.x, self.w, g[:, :, j, :], 2 ** j, self.circular)
            gx += dx
            gw += dw
        return gx, gw


class GroupConv(Function):
    def forward(self, f, w, padding="circular"):
        if f.ndim != 4 or w.ndim != 4 or f.shape[1] != w.shape[1]:
            raise ValueError(f"group_conv expects f[B,C,S,L], w[O,C,Sk,K], got {f.shape}, {w.shape}")
        B, C, S, L = f.shape
        O, _, Sk, K = w.shape
        if Sk > S:
            raise ValueError(f"kernel scale extent {Sk} exceeds number of scales {S}")
        self.circular = ops.check_padding(padding)
        _check_support(L, K, S, self.circular)
        self.f, self.w = f, w
        out = np.empty((B, O, S, L), dtype=np.result_type(f, w))
        for j in range(S):
            n = min(Sk, S - j)  # scale offsets beyond the top scale are truncated
            xs = f[:, :, j:j + n, :].reshape(B, C * n, L)
            ws = w[:, :, :n, :].reshape(O, C * n, K)
            out[:, :, j, :] = backend.conv1d_forward(xs, ws, 2 ** j, self.circular)
        return out

    def backward(self, g):
        B, C, S, L = self.f.shape
        O, _, Sk, K = self.w.shape
        gf = np.zeros(self.f.shape, dtype=g.dtype)
        gw = np.zeros(self.w.shape, dtype=g.dtype)
        for j in range(S):
            n = min(Sk, S - j)
            xs = self.f[:, :, j:j + n, :].reshape(B, C * n, L)
            ws = self.w[:, :, :n, :].reshape(O, C * n, K)
            dx, dw = backend.conv1d_backward(xs, ws, g[:, :, j, :], 2 ** j, self.circular)
            gf[:, :, j:j + n, :] += dx.reshape(B, C, n, L)
            gw[:, :, :n, :] += dw.reshape(O, C, n, K)
        return gf, gw


def lift(x, weight, grid=ScaleGrid(), padding="circular"):
    """Lift ``x[B,Cin,L]`` to ``[B,Cout,S,L]``; slice j is conv1d with the base kernel dilated by 2**j."""
    return Lift.apply(x, weight, num_scales=grid.num_scales, padding=padding)


def group_conv(f, weight, padding="circular"):
    """Group convolution of ``f[B,C,S,L]`` with ``weight[O,C,Sk,K]``.

    out[b,o,j,u] = sum over s' < Sk with j+s' < S, and over c, of
    conv1d(f[b,c,j+s'], dilate(weight[o,c,s'], j))[u].
    """
    return GroupConv.apply(f, weight, padding=padding)


def project(f, mode="max"):
    """Reduce the scale axis of ``f[B,C,S,L]``; positions are kept."""
    if mode == "max":
        return ops.maxpool_axis(f, 2)
    if mode == "mean":
        return ops.mean(f, axis=2)
    raise ValueError(f"projection mode must be 'max' or 'mean', got {mode!r}")


class LiftingLayer(nn.Module):
    def __init__(self, in_channels, out_channels, kernel_size, grid, rng, padding="circular",
                 dtype=DEFAULT_DTYPE):
        super().__init__()
        if kernel_size < 1:
            raise ValueError("kernel_size must be >= 1")
        self.weight = nn.uniform_init(rng, (out_channels, in_channels, kernel_size),
                                      in_channels * kernel_size, dtype)
        self.grid = grid
        self.padding = padding

    def forward(self, x):
        return lift(x, self.weight, self.grid, self.padding)


class GroupConvLayer(nn.Module):
    def __init__(self, in_channels, out_channels, kernel_size, grid, rng, scale_extent=2,
                 padding="circular", dtype=DEFAULT_DTYPE):
        super().__init__()
        if scale_extent > grid.num_scales:
            raise ValueError(f"scale_extent {scale_extent} exceeds number of scales {grid.num_scales}")
        self.weight = nn.uniform_init(rng, (out_channels, in_channels, scale_extent, kernel_size),
                                      in_channels * scale_extent * kernel_size, dtype)
        self.grid = grid
        self.padding = padding

    def forward(self, f):
        return group_conv(f, self.weight, self.padding)


class Projection(nn.Module):
    def __init__(self, mode="max"):
        super().__init__()
        self.mode = mode

    def forward(self, f):
        return project(f, self.mode)


def _as_array(y):
    return y.data if isinstance(y, Tensor) else np.asarray(y)


def dyadic_upsample(x):
    """Nearest-neighbour upsampling by two along the last axis: x'[v] = x[v // 2]."""
    return np.repeat(np.asarray(x), 2, axis=-1)


def shift(x, t, mode="circular"):
    """Translate along the last axis: out[v] = x[v - t]."""
    x = np.asarray(x)
    if mode == "circular":
        return np.roll(x, t, axis=-1)
    out = np.zeros_like(x)
    if t >= 0:
        out[..., t:] = x[..., : x.shape[-1] - t]
    else:
        out[..., :t] = x[..., -t:]
    return out


def check_equivariance(layer, x, transform="shift", t=1, shift_mode="circular", positions=None):
    """Max abs equivariance error of ``layer`` on ``x``.

    ``transform="shift"`` compares layer(shift_t x) with layer(x) shifted by t
    along the last axis (restricted to ``positions`` when given, which is how
    zero-padded layers are checked on interior positions).

    ``transform="scale"`` is for lifting layers: x is upsampled by two and
    lift(x')[..., j+1, 2u] is compared with lift(x)[..., j, u] for every
    interior scale j < S-1.
    """
    x = np.asarray(x)
    dtype = x.dtype if x.dtype.kind == "f" else np.float64
    run = lambda a: _as_array(layer(Tensor(a, dtype=dtype)))
    if transform == "shift":
        lhs = run(shift(x, t, shift_mode))
        rhs = shift(run(x), t, shift_mode)
        if positions is not None:
            lhs, rhs = lhs[..., positions], rhs[..., positions]
        return float(np.max(np.abs(lhs - rhs))) if lhs.size else 0.0
    if transform == "scale":
        base = run(x)
        up = run(dyadic_upsample(x))
        if base.ndim != 4:
            raise ValueError("scale check needs a lifted output [B,C,S,L]")
        S = base.shape[2]
        if S < 2:
            return 0.0
        return float(np.max(np.abs(up[:, :, 1:, ::2] - base[:, :, :-1, :])))
    raise ValueError(f"unknown transform {transform!r}")
