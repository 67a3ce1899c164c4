"""SimCLR-style contrastive pre-training of classifier trunks."""
import logging
import math
from dataclasses import dataclass

import numpy as np

from . import nn
from .numerics import ops
from .numerics.optim import Adam
from .numerics.tensor import Tensor

logger = logging.getLogger(__name__)


class PretrainDiverged(FloatingPointError):
    pass


class TransferError(ValueError):
    pass


@dataclass
class AugmentationPolicy:
    crop_min_fraction: float = 0.5
    flip_probability: float = 0.5

    def __post_init__(self):
        if not 0 < self.crop_min_fraction <= 1:
            raise ValueError("crop_min_fraction must lie in (0, 1]")
        if not 0 <= self.flip_probability <= 1:
            raise ValueError("flip_probability must lie in [0, 1]")


@dataclass
class PretrainConfig:
    batch_size: int = 128
    temperature: float = 0.1
    epochs: int = 50
    lr: float = 3e-4
    projection_dim: int = 64
    crop_min_fraction: float = 0.5
    flip_probability: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 2:
            raise ValueError("batch_size must be at least 2")
        if not self.temperature > 0:
            raise ValueError("temperature must be positive")
        if self.epochs < 0:
            raise ValueError("epochs must be non-negative")

    @property
    def policy(self):
        return AugmentationPolicy(self.crop_min_fraction, self.flip_probability)


def resample(rows, start, span, length):
    """Linearly resample positions start .. start+span-1 of ``rows`` to ``length`` points."""
    pos = np.linspace(start, start + span - 1, length)
    lo = np.floor(pos).astype(np.int64)
    hi = np.minimum(lo + 1, rows.shape[-1] - 1)
    frac = pos - lo
    return rows[..., lo] * (1 - frac) + rows[..., hi] * frac


def augment_batch(windows, policy, rng):
    """Random resized crop along positions, then a random reversal, per window.

    All feature rows of one window share the crop and the flip.
    """
    windows = np.asarray(windows)
    n, _, L = windows.shape
    min_span = math.ceil(policy.crop_min_fraction * L)
    spans = rng.integers(min_span, L + 1, size=n)
    starts = np.floor(rng.random(n) * (L - spans + 1)).astype(np.int64)
    flips = rng.random(n) < policy.flip_probability
    out = np.empty(windows.shape, dtype=np.float64)
    for i in range(n):
        v = resample(windows[i].astype(np.float64), starts[i], spans[i], L)
        out[i] = v[:, ::-1] if flips[i] else v
    return out.astype(windows.dtype, copy=False)


def augment(window, policy, rng):
    """One augmented view of a single (features, positions) window."""
    return augment_batch(np.asarray(window)[None], policy, rng)[0]


def positive_pairs(n):
    """Index of each row's partner when rows (2i, 2i+1) are positive pairs."""
    return np.arange(2 * n) ^ 1


def nt_xent(z, temperature):
    """Mean NT-Xent loss over 2N embeddings laid out as pairs (2i, 2i+1)."""
    if not temperature > 0:
        raise ValueError("temperature must be positive")
    if not isinstance(z, Tensor):
        z = Tensor(np.asarray(z, dtype=np.float64), dtype=np.float64)
    rows = z.shape[0]
    if rows % 2 or rows < 4:
        raise ValueError(f"need 2N embeddings with N >= 2, got {rows}")
    zn = ops.l2_normalize(z, axis=1)
    sim = ops.matmul(zn, ops.transpose(zn))
    mask = np.zeros((rows, rows), dtype=z.dtype)
    np.fill_diagonal(mask, -np.inf)
    logits = sim * (1.0 / temperature) + Tensor(mask, dtype=z.dtype)
    return ops.softmax_cross_entropy(logits, positive_pairs(rows // 2))


class ProjectionHead(nn.Module):
    """Two dense layers with a ReLU between; used only while pre-training."""

    def __init__(self, in_features, out_features, rng, dtype):
        super().__init__()
        self.net = nn.Sequential(
            nn.Linear(in_features, in_features, rng, dtype),
            nn.ReLU(),
            nn.Linear(in_features, out_features, rng, dtype),
        )

    def forward(self, h):
        return self.net(h)


def trunk_state(model):
    return {k: v for k, v in model.state_dict().items() if k.startswith("trunk.")}


def _interleave(a, b):
    out = np.empty((2 * len(a),) + a.shape[1:], dtype=a.dtype)
    out[0::2] = a
    out[1::2] = b
    return out


def pretrain(encoder, windows, cfg=None):
    """Contrastive pre-training of ``encoder.trunk`` on unlabeled windows.

    Returns ``(trunk_state, loss_curve)``; the projection head is discarded.
    A final batch smaller than two windows is skipped.
    """
    cfg = cfg or PretrainConfig()
    windows = np.asarray(windows)
    dtype = next(iter(encoder.parameters().values())).dtype
    rng = np.random.default_rng(cfg.seed)
    head = ProjectionHead(encoder.feature_dim, cfg.projection_dim, rng, dtype)
    params = {f"encoder.{k}": p for k, p in encoder.named_parameters() if k.startswith("trunk.")}
    params.update((f"head.{k}", p) for k, p in head.named_parameters())
    opt = Adam(params, lr=cfg.lr)
    policy = cfg.policy
    encoder.train()
    curve = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(windows))
        total, count = 0.0, 0
        for b, start in enumerate(range(0, len(order), cfg.batch_size)):
            idx = order[start:start + cfg.batch_size]
            if len(idx) < 2:
                continue
            brng = np.random.default_rng((cfg.seed, epoch, b))
            batch = windows[idx]
            views = _interleave(augment_batch(batch, policy, brng), augment_batch(batch, policy, brng))
            opt.zero_grad()
            z = head(encoder.features(Tensor(views.astype(dtype), dtype=dtype)))
            loss = nt_xent(z, cfg.temperature)
            value = float(loss.data)
            if not math.isfinite(value):
                raise PretrainDiverged(f"non-finite NT-Xent loss at epoch {epoch}, batch {b} "
                                       f"(batch size {len(idx)}, max |z| {np.abs(z.data).max():.3g})")
            loss.backward()
            opt.step()
            total += value * len(idx)
            count += len(idx)
        curve.append(total / count if count else float("nan"))
        logger.info("pretrain epoch %d: loss %.4f", epoch + 1, curve[-1])
    return trunk_state(encoder), curve


def transfer(pretrained, classifier):
    """Copy trunk tensors by name into ``classifier``; the head keeps its own init."""
    target = trunk_state(classifier)
    source = {k: v for k, v in pretrained.items() if k.startswith("trunk.")}
    problems = []
    for name in target:
        if name not in source:
            problems.append(f"{name} (missing from pretrained weights)")
        elif np.shape(source[name]) != target[name].shape:
            problems.append(f"{name} (shape {np.shape(source[name])} vs {target[name].shape})")
    for name in source:
        if name not in target:
            problems.append(f"{name} (not in classifier)")
    if problems:
        raise TransferError("cannot transfer trunk weights: " + "; ".join(problems))
    classifier.load_state_dict(source, strict=False)
    return classifier
