"""Equivariance and gradient checks run against a configured model family."""
import numpy as np

from ..groupconv import ScaleGrid, check_equivariance, group_conv, lift, project
from ..models import build_model
from ..numerics import ops
from ..numerics.ops import MaxAxis, Relu
from ..numerics.gradcheck import relative_error
from ..numerics.tensor import Tensor, backward, current_tape, no_grad, reset_tape

TRANSLATION_TOL = 1e-12
SCALE_TOL = 1e-12
GRADIENT_TOL = 1e-4


def layer_errors(kernel_size=3, num_scales=3, scale_extent=2, draws=20, length=16, seed=0, inputs=20):
    """Max translation error of lift, group_conv and project over every circular
    shift, and max scale error of lift, for ``draws`` weight draws each applied
    to a batch of ``inputs`` random inputs (float64)."""
    rng = np.random.default_rng(seed)
    grid = ScaleGrid(num_scales)
    worst = {"translation": 0.0, "scale": 0.0}
    for _ in range(draws):
        x = rng.standard_normal((inputs, 6, length))
        wl = rng.standard_normal((4, 6, kernel_size))
        wg = rng.standard_normal((3, 4, scale_extent, kernel_size))
        f = lift(Tensor(x, dtype=np.float64), wl, grid).data
        stages = [
            (lambda t: lift(t, wl, grid), x),
            (lambda t: group_conv(t, wg), f),
            (lambda t: project(t, "max"), f),
            (lambda t: project(t, "mean"), f),
        ]
        for layer, inp in stages:
            for t in range(length):
                worst["translation"] = max(worst["translation"], check_equivariance(layer, inp, "shift", t))
        worst["scale"] = max(worst["scale"], check_equivariance(lambda t: lift(t, wl, grid), x, "scale"))
    return worst


def trunk_translation_error(model, x):
    """Max error of the pre-head feature map permuting with every circular shift."""
    model.eval()
    L = x.shape[-1]
    worst = 0.0
    with no_grad():
        run = lambda a: model.trunk(Tensor(a, dtype=np.float64)).data
        base = run(x)
        for t in range(L):
            worst = max(worst, float(np.max(np.abs(run(np.roll(x, t, axis=-1)) - np.roll(base, t, axis=-1)))))
    return worst


def kink_margin(model, x):
    """Smallest distance of any ReLU input from 0, or of any max from the runner-up,
    in one training-mode forward pass. Finite differences across a kink are meaningless."""
    model.train()
    buffers = {k: v.copy() for k, v in model.named_buffers()}
    reset_tape()
    probe = Tensor(x, requires_grad=True, dtype=np.float64)
    model(probe)
    margin = np.inf
    for fn in current_tape().records:
        a = fn.inputs[0].data
        if isinstance(fn, Relu):
            margin = min(margin, float(np.min(np.abs(a))))
        elif isinstance(fn, MaxAxis) and a.shape[fn.axis] > 1:
            top = np.sort(a, axis=fn.axis)
            first, second = top.take(-1, axis=fn.axis), top.take(-2, axis=fn.axis)
            # ties among ReLU zeros are harmless: the ReLU margin already covers them
            live = first != 0
            if live.any():
                margin = min(margin, float(np.min((first - second)[live])))
    reset_tape()
    model.load_state_dict(buffers, strict=False)
    return margin


def kink_free_input(model, rng, shape, margin=2e-5, tries=100):
    """Draw standard-normal inputs until every kink is at least ``margin`` away."""
    for _ in range(tries):
        x = rng.standard_normal(shape)
        if kink_margin(model, x) >= margin:
            return x
    raise RuntimeError(f"no input with kink margin {margin} in {tries} draws")


def model_gradient_error(model, x, labels=None, eps=1e-5, coords=25, seed=0, objective=None):
    """Finite-difference check of the loss gradient on a sample of every parameter's entries.

    The loss is cross-entropy against ``labels`` unless a scalar ``objective``
    of the model output is given. Batch statistics are used (training mode);
    running buffers are restored around each evaluation so repeated forwards
    see identical state.
    """
    model.train()
    buffers = {k: v.copy() for k, v in model.named_buffers()}
    xt = Tensor(x, dtype=np.float64)

    def loss():
        model.load_state_dict(buffers, strict=False)
        out = model(xt)
        return objective(out) if objective else ops.softmax_cross_entropy(out, labels)

    reset_tape()
    for p in model.parameters().values():
        p.grad = None
    backward(loss())
    rng = np.random.default_rng(seed)
    worst = 0.0
    with no_grad():
        for p in model.parameters().values():
            flat = p.data.reshape(-1)
            picks = rng.choice(flat.size, size=min(coords, flat.size), replace=False)
            numeric = np.empty(len(picks))
            for n, i in enumerate(picks):
                orig = flat[i]
                flat[i] = orig + eps
                fp = float(loss().data)
                flat[i] = orig - eps
                fm = float(loss().data)
                flat[i] = orig
                numeric[n] = (fp - fm) / (2 * eps)
            worst = max(worst, relative_error(p.grad.reshape(-1)[picks], numeric))
    model.load_state_dict(buffers, strict=False)
    return worst


def run_suite(cfg, draws=20, seed=0):
    """All checks for ``cfg``'s model; returns a dict of max errors (None when not applicable)."""
    m = cfg.model
    conv = hasattr(m, "kernel_size")
    equi = cfg.model_kind in ("equi_onedcnn", "equi_resnet")
    out = {"translation": None, "scale": None}
    if equi:
        out.update(layer_errors(m.kernel_size, m.num_scales, m.scale_extent, draws, m.length, seed))
    rng = np.random.default_rng(seed)
    L = getattr(m, "length", 16)
    model = build_model(cfg.model_kind, m, seed=seed, dtype=np.float64)
    x = kink_free_input(model, rng, (2, getattr(m, "in_channels", 6), L))
    if conv and m.padding == "circular":
        trunk = trunk_translation_error(model, x)
        out["translation"] = max(out["translation"] or 0.0, trunk)
    labels = rng.integers(0, 17, size=len(x))
    out["gradient"] = model_gradient_error(model, x, labels, seed=seed)
    return out


def passed(errors):
    limits = {"translation": TRANSLATION_TOL, "scale": SCALE_TOL, "gradient": GRADIENT_TOL}
    return all(v is None or v <= limits[k] for k, v in errors.items())
