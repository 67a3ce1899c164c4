"""Central finite-difference gradient check."""
import numpy as np

from .tensor import Tensor, backward, reset_tape


def numeric_grad(f, x, eps=1e-5):
    x = np.array(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        fp = float(f(Tensor(x.copy(), dtype=np.float64)).data)
        flat[i] = orig - eps
        fm = float(f(Tensor(x.copy(), dtype=np.float64)).data)
        flat[i] = orig
        gflat[i] = (fp - fm) / (2 * eps)
    return grad


def analytic_grad(f, x):
    reset_tape()
    xt = Tensor(np.array(x, dtype=np.float64), requires_grad=True, dtype=np.float64)
    out = f(xt)
    if out.size != 1:
        raise ValueError(f"gradcheck needs a scalar-valued function, got shape {out.shape}")
    if out.creator is None:
        return np.zeros_like(xt.data)
    backward(out)
    return np.zeros_like(xt.data) if xt.grad is None else xt.grad


def relative_error(analytic, numeric):
    denom = np.maximum(1.0, np.maximum(np.abs(analytic), np.abs(numeric)))
    return float(np.max(np.abs(analytic - numeric) / denom)) if analytic.size else 0.0


def fd_gradcheck(f, x, eps=1e-5, analytic=None):
    """Max over coordinates of |analytic - numeric| / max(1, |analytic|, |numeric|).

    ``f`` maps a float64 Tensor to a scalar Tensor. ``analytic`` overrides the
    backward-pass gradient, which is how fault injection is tested.
    """
    x = np.asarray(x, dtype=np.float64)
    probe = f(Tensor(x.copy(), dtype=np.float64))
    if probe.size != 1:
        raise ValueError(f"gradcheck needs a scalar-valued function, got shape {probe.shape}")
    a = analytic_grad(f, x) if analytic is None else np.asarray(analytic, dtype=np.float64)
    n = numeric_grad(f, x, eps)
    return relative_error(a, n)
