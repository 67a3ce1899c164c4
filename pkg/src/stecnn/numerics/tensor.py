"""Dense tensors recorded on a reverse-mode differentiation tape."""
import contextlib
import threading

import numpy as np

DEFAULT_DTYPE = np.float32


class TapeError(RuntimeError):
    pass


class Tape:
    """Ordered record of differentiable operations.

    Operations are appended as they execute, so the record is already in
    topological order. A tape is consumed by one ``backward`` call; recording
    a new operation afterwards starts a fresh record.
    """

    def __init__(self):
        self.records = []
        self.consumed = False

    def record(self, fn):
        if self.consumed:
            self.reset()
        fn.tape_index = len(self.records)
        self.records.append(fn)

    def reset(self):
        for fn in self.records:
            fn.tape_index = None
        self.records = []
        self.consumed = False

    def __len__(self):
        return len(self.records)


_state = threading.local()


def current_tape():
    tape = getattr(_state, "tape", None)
    if tape is None:
        tape = _state.tape = Tape()
    return tape


def reset_tape():
    current_tape().reset()


def grad_enabled():
    return getattr(_state, "grad_enabled", True)


@contextlib.contextmanager
def no_grad():
    prev = grad_enabled()
    _state.grad_enabled = False
    try:
        yield
    finally:
        _state.grad_enabled = prev


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "creator", "name")

    def __init__(self, data, requires_grad=False, dtype=None, name=None):
        if isinstance(data, Tensor):
            data = data.data
        if dtype is None:
            dtype = data.dtype if isinstance(data, np.ndarray) and data.dtype.kind == "f" else DEFAULT_DTYPE
        self.data = np.asarray(data, dtype=dtype)
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self.creator = None
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self):
        return self.data.size

    def numpy(self):
        return self.data

    def item(self):
        return self.data.item()

    def detach(self):
        return Tensor(self.data, dtype=self.data.dtype)

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        tag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{tag})"

    def backward(self):
        backward(self)

    # arithmetic sugar; the ops live in ``ops``
    def __add__(self, other):
        from .ops import add
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        from .ops import add, neg
        return add(self, neg(_wrap(other, self.dtype)))

    def __rsub__(self, other):
        from .ops import add, neg
        return add(_wrap(other, self.dtype), neg(self))

    def __neg__(self):
        from .ops import neg
        return neg(self)

    def __mul__(self, other):
        from .ops import mul
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        from .ops import mul, reciprocal
        return mul(self, reciprocal(_wrap(other, self.dtype)))

    def __matmul__(self, other):
        from .ops import matmul
        return matmul(self, other)

    def sum(self, axis=None):
        from .ops import sum_
        return sum_(self, axis)

    def mean(self, axis=None):
        from .ops import mean
        return mean(self, axis)

    def reshape(self, *shape):
        from .ops import reshape
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)


def _wrap(value, dtype):
    if isinstance(value, Tensor):
        return value
    return Tensor(np.asarray(value, dtype=dtype), dtype=dtype)


def tensor(data, requires_grad=False, dtype=None):
    return Tensor(data, requires_grad=requires_grad, dtype=dtype)


class Function:
    """A differentiable operation.

    Subclasses implement ``forward`` on raw arrays and ``backward`` returning
    one gradient per input (``None`` for inputs that take no gradient).
    """

    def __init__(self):
        self.inputs = ()
        self.output = None
        self.tape_index = None

    def forward(self, *arrays, **kwargs):
        raise NotImplementedError

    def backward(self, grad):
        raise NotImplementedError

    @classmethod
    def apply(cls, *inputs, **kwargs):
        fn = cls()
        inputs = tuple(_wrap(t, DEFAULT_DTYPE) for t in inputs)
        out = Tensor(fn.forward(*(t.data for t in inputs), **kwargs))
        if grad_enabled() and any(t.requires_grad for t in inputs):
            out.requires_grad = True
            out.creator = fn
            fn.inputs = inputs
            fn.output = out
            current_tape().record(fn)
        return out


def backward(loss):
    """Populate ``.grad`` of every requires-grad leaf reachable from ``loss``."""
    if loss.size != 1:
        raise TapeError(f"backward needs a scalar loss, got shape {loss.shape}")
    tape = current_tape()
    fn = loss.creator
    if fn is None or fn.tape_index is None or tape.consumed:
        if tape.consumed:
            raise TapeError("backward called twice without tape reset")
        raise TapeError("loss is not on the current tape")

    grads = {id(loss): np.ones_like(loss.data)}
    for rec in reversed(tape.records[: fn.tape_index + 1]):
        g = grads.pop(id(rec.output), None)
        if g is None:
            continue
        in_grads = rec.backward(g)
        for t, tg in zip(rec.inputs, in_grads):
            if tg is None or not t.requires_grad:
                continue
            if tg.shape != t.shape:
                raise TapeError(f"{type(rec).__name__} produced gradient of shape {tg.shape} for input {t.shape}")
            if t.creator is None:
                t.grad = tg.astype(t.dtype, copy=True) if t.grad is None else t.grad + tg
            else:
                key = id(t)
                grads[key] = tg if key not in grads else grads[key] + tg
    tape.consumed = True
    for rec in tape.records:
        rec.tape_index = None
    tape.records = []
