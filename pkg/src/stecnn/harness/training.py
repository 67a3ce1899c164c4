"""Supervised training and single-split evaluation."""
import logging
import math

import numpy as np

from .. import data as data_mod
from ..contrastive import pretrain, transfer
from ..metrics import eval_report
from ..models import build_model, predict_scores
from ..numerics.ops import softmax_cross_entropy
from ..numerics.optim import Adam
from ..numerics.tensor import DEFAULT_DTYPE, Tensor

logger = logging.getLogger(__name__)


class TrainingDiverged(FloatingPointError):
    pass


def derive_seed(seed, index):
    """Independent per-split seed from (run seed, split index)."""
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


def _batches(n, batch_size, rng):
    order = rng.permutation(n)
    starts = list(range(0, n, batch_size))
    # a trailing single-sample batch is folded into the previous one
    if len(starts) > 1 and n - starts[-1] == 1:
        starts.pop()
    ends = starts[1:] + [n]
    return [order[s:e] for s, e in zip(starts, ends)]


def train_supervised(model, X, y, epochs, lr=3e-4, batch_size=1024, seed=0):
    """Minimize softmax cross-entropy with Adam; returns the per-epoch mean loss.

    The batch size is clamped to the dataset size and the data are
    reshuffled each epoch from ``seed``.
    """
    X = np.asarray(X)
    y = np.asarray(y, dtype=np.int64)
    if len(X) != len(y):
        raise ValueError("X and y differ in length")
    dtype = next(iter(model.parameters().values())).dtype
    Xc = X.astype(dtype, copy=False)
    bs = max(1, min(batch_size, len(X)))
    rng = np.random.default_rng(seed)
    opt = Adam(model.parameters(), lr=lr)
    model.train()
    curve = []
    for epoch in range(epochs):
        total = 0.0
        for b, idx in enumerate(_batches(len(X), bs, rng)):
            opt.zero_grad()
            loss = softmax_cross_entropy(model(Tensor(Xc[idx], dtype=dtype)), y[idx])
            value = float(loss.data)
            if not math.isfinite(value):
                raise TrainingDiverged(f"non-finite loss at epoch {epoch}, batch {b}")
            loss.backward()
            opt.step()
            total += value * len(idx)
        curve.append(total / len(X))
        logger.debug("epoch %d: loss %.5f", epoch + 1, curve[-1])
    return curve


def evaluate(model, X, y, ks=(1, 3, 5)):
    scores = predict_scores(model, np.asarray(X, dtype=DEFAULT_DTYPE))
    return eval_report(scores, y, ks=ks)


def standardize_split(X_train, X_test, stats=None):
    if stats is None:
        stats = data_mod.fit_stats(X_train)
    return data_mod.apply_stats(X_train, stats), data_mod.apply_stats(X_test, stats), stats


def fit_and_evaluate(cfg, X_train, y_train, X_test, y_test, seed, pretrained=None, standardize=True):
    """Build, optionally transfer, train and evaluate one model; returns (model, curve, report)."""
    if standardize:
        X_train, X_test, _ = standardize_split(X_train, X_test)
    model = build_model(cfg.model_kind, cfg.model, seed=seed)
    if pretrained is not None:
        transfer(pretrained, model)
    curve = train_supervised(model, X_train, y_train, cfg.epochs, lr=cfg.train.lr,
                             batch_size=cfg.train.batch_size, seed=seed)
    return model, curve, evaluate(model, X_test, y_test, cfg.eval_ks)


def load_track(data_cfg):
    if data_cfg.csv:
        return data_mod.load_csv(data_cfg.csv)
    return data_mod.synthesize(data_cfg.synthetic)


def unlabeled_windows(cfg):
    pre = cfg.pretrain
    track = data_mod.load_csv(pre.unlabeled_csv) if pre.unlabeled_csv else data_mod.synthesize(pre.unlabeled)
    X, _ = data_mod.window_arrays(track)
    return data_mod.apply_stats(X, data_mod.fit_stats(X))


def run_pretrain(cfg, windows=None):
    """Contrastive pre-training of the configured model's trunk; returns (state, curve)."""
    if windows is None:
        windows = unlabeled_windows(cfg)
    encoder = build_model(cfg.model_kind, cfg.model, seed=cfg.pretrain.config.seed)
    return pretrain(encoder, windows.astype(DEFAULT_DTYPE), cfg.pretrain.config)
