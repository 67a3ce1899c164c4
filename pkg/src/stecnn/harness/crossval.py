"""5x2 cross-validation runs, their reports, and report comparison."""
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .. import data as data_mod
from .checkpoint import config_hash, load_checkpoint
from .stats import mann_whitney_u
from .training import derive_seed, fit_and_evaluate, load_track

logger = logging.getLogger(__name__)

METRICS = ("g_mean", "mauc", "mmcc", "acc_0", "acc_1", "acc_3", "acc_5")


def worker_count():
    try:
        return max(1, int(os.environ.get("STECNN_THREADS", "1")))
    except ValueError:
        return 1


def _run_split(args):
    cfg, X, y, train_idx, test_idx, index, pretrained, stats = args
    seed = derive_seed(cfg.seed, index)
    Xtr, Xte = X[train_idx], X[test_idx]
    if stats is None:
        stats = data_mod.fit_stats(Xtr)
    Xtr, Xte = data_mod.apply_stats(Xtr, stats), data_mod.apply_stats(Xte, stats)
    _, curve, report = fit_and_evaluate(cfg, Xtr, y[train_idx], Xte, y[test_idx], seed,
                                        pretrained=pretrained, standardize=False)
    logger.info("split %d: %s", index, {k: round(v, 4) for k, v in report.metrics().items() if v is not None})
    return {
        "split": index,
        "repetition": index // 2,
        "fold": index % 2,
        "seed": seed,
        "n_train": int(len(train_idx)),
        "n_test": int(len(test_idx)),
        "final_loss": curve[-1] if curve else None,
        **report.to_dict(),
    }


def aggregate(splits, metrics=METRICS):
    """Mean and population std per metric, over splits where it is defined."""
    out = {}
    for m in metrics:
        values = [s["metrics"][m] for s in splits if s["metrics"].get(m) is not None]
        if not values:
            continue
        mean = float(np.mean(values))
        std = float(np.std(values))
        out[m] = {"mean": mean, "std": std, "n": len(values), "display": f"{mean:.3f}±{std:.3f}"}
    return out


def crossval(cfg, X=None, y=None):
    """Run the 10 splits of a 5x2 CV; returns the report as a dict.

    Windows default to the configured data source. A configured pretrain
    checkpoint is transferred into every split's model before training.
    """
    if X is None:
        X, y = data_mod.window_arrays(load_track(cfg.data))
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    global_stats = data_mod.fit_stats(X) if cfg.data.standardization == "global" else None
    pretrained = None
    if cfg.pretrain_checkpoint:
        pretrained, _ = load_checkpoint(cfg.pretrain_checkpoint)
    splits = data_mod.kfold_5x2(len(X), cfg.seed)
    jobs = [(cfg, X, y, tr, te, i, pretrained, global_stats) for i, (tr, te) in enumerate(splits)]
    workers = worker_count()
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_split, jobs))
    else:
        results = [_run_split(job) for job in jobs]
    config = cfg.to_dict()
    return {
        "kind": "crossval",
        "model": cfg.model_kind,
        "config": config,
        "config_hash": config_hash(config),
        "seed": cfg.seed,
        "n_windows": int(len(X)),
        "splits": results,
        "aggregate": aggregate(results),
    }


def dumps(report):
    return json.dumps(report, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def write_report(report, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(report))


def read_report(path):
    with open(path, encoding="utf-8") as fh:
        report = json.load(fh)
    if "splits" not in report:
        raise ValueError(f"{path}: not a cross-validation report")
    return report


def compare(report_a, report_b, metrics=METRICS):
    """Per-metric Mann-Whitney U test over the per-split values of two reports."""
    out = []
    for m in metrics:
        a = [s["metrics"][m] for s in report_a["splits"] if s["metrics"].get(m) is not None]
        b = [s["metrics"][m] for s in report_b["splits"] if s["metrics"].get(m) is not None]
        if not a or not b:
            continue
        res = mann_whitney_u(a, b)
        out.append({"metric": m, "u": res.u, "p": res.p, "method": res.method,
                    "significant": res.significant,
                    "mean_a": float(np.mean(a)), "mean_b": float(np.mean(b))})
    return {"kind": "comparison", "model_a": report_a.get("model"), "model_b": report_b.get("model"),
            "comparisons": out}
