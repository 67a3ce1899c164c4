"""Kernel backend selection.

The compiled extension is used when it imports; otherwise the numpy kernels
are used. ``STECNN_BACKEND=python`` forces the fallback.
"""
import logging
import os

import numpy as np

from . import _kernels_py

logger = logging.getLogger(__name__)

_compiled = None
if os.environ.get("STECNN_BACKEND", "").lower() != "python":
    try:
        from . import _ckernels as _compiled
    except ImportError:  # pragma: no cover - depends on the build
        logger.debug("compiled kernels unavailable, using numpy fallback")

BACKENDS = {"python": _kernels_py}
if _compiled is not None:
    BACKENDS["compiled"] = _compiled

_active = "compiled" if _compiled is not None else "python"


def name():
    return _active


def use(backend):
    """Switch the active kernel backend (``"compiled"`` or ``"python"``)."""
    global _active
    if backend not in BACKENDS:
        raise ValueError(f"backend {backend!r} not available; have {sorted(BACKENDS)}")
    _active = backend


def conv1d_forward(x, w, dilation, circular):
    x = np.ascontiguousarray(x)
    w = np.ascontiguousarray(w, dtype=x.dtype)
    return BACKENDS[_active].conv1d_forward(x, w, int(dilation), bool(circular))


def conv1d_backward(x, w, gy, dilation, circular):
    x = np.ascontiguousarray(x)
    w = np.ascontiguousarray(w, dtype=x.dtype)
    gy = np.ascontiguousarray(gy, dtype=x.dtype)
    return BACKENDS[_active].conv1d_backward(x, w, gy, int(dilation), bool(circular))
