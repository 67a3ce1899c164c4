"""Adam with bias correction."""
from dataclasses import dataclass, field

import numpy as np


class NonFiniteGradient(FloatingPointError):
    pass


@dataclass
class AdamState:
    lr: float = 3e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    def __post_init__(self):
        for key in ("lr", "beta1", "beta2", "eps"):
            if not getattr(self, key) > 0:
                raise ValueError(f"{key} must be positive")


def adam_step(params, grads, state):
    """One in-place Adam update of ``params`` (name -> array).

    ``grads`` maps the same names to gradient arrays; missing or ``None``
    gradients count as zero. Raises before touching anything when a gradient
    is non-finite.
    """
    for name, g in grads.items():
        if g is not None and not np.all(np.isfinite(g)):
            raise NonFiniteGradient(f"non-finite gradient for {name!r}")
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.t
    c2 = 1.0 - b2 ** state.t
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            g = np.zeros_like(p)
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
        v = state.v[name]
        if m.shape != p.shape:
            raise ValueError(f"moment shape {m.shape} does not match parameter {name!r} {p.shape}")
        m *= b1
        m += (1 - b1) * g
        v *= b2
        v += (1 - b2) * g * g
        p -= (state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)).astype(p.dtype)
    return params, state


class Adam:
    """Adam over a dict of parameter tensors, reading their ``.grad``."""

    def __init__(self, parameters, lr=3e-4, beta1=0.9, beta2=0.999, eps=1e-8):
        self.parameters = dict(parameters)
        self.state = AdamState(lr=lr, beta1=beta1, beta2=beta2, eps=eps)

    def zero_grad(self):
        for p in self.parameters.values():
            p.grad = None

    def step(self):
        params = {k: p.data for k, p in self.parameters.items()}
        grads = {k: p.grad for k, p in self.parameters.items()}
        adam_step(params, grads, self.state)
