"""Command-line interface: ``stecnn <subcommand> ...``.

Exit codes: 0 success, 1 usage error, 2 runtime failure.
"""
import argparse
import json
import logging
import sys

import numpy as np

from .. import data as data_mod
from ..contrastive import transfer
from ..models import build_model
from .checkpoint import config_hash, load_checkpoint, save_checkpoint
from .config import RunConfig, from_dict, load_config
from .crossval import compare, crossval, dumps, read_report, write_report
from .equicheck import passed, run_suite
from .training import evaluate, load_track, run_pretrain, train_supervised

logger = logging.getLogger("stecnn")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")


def _run_config(args):
    cfg = load_config(args.config) if args.config else RunConfig()
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "epochs", None) is not None and args.command == "train":
        cfg.train.epochs = args.epochs
    if getattr(args, "data", None):
        cfg.data.csv = args.data
    return cfg


def _provenance(cfg, stage, **extra):
    config = cfg.to_dict()
    return {"config": config, "config_hash": config_hash(config), "seed": cfg.seed,
            "stage": stage, "model_kind": cfg.model_kind, **extra}


def _write_text(text, path):
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_synth(args):
    base = load_config(args.config).data.synthetic if args.config else data_mod.SyntheticConfig()
    overrides = {k: getattr(args, k) for k in ("length", "seed", "positive_fraction", "width_multiplier")
                 if getattr(args, k) is not None}
    cfg = data_mod.SyntheticConfig(**{**base.__dict__, **overrides})
    track = data_mod.synthesize(cfg)
    data_mod.save_csv(track, args.out)
    _, y = data_mod.window_arrays(track)
    print(f"wrote {track.length} locations, {len(y)} windows ({np.mean(y > 0):.2%} positive) to {args.out}")


def cmd_train(args):
    cfg = _run_config(args)
    X, y = data_mod.window_arrays(load_track(cfg.data))
    stats = data_mod.fit_stats(X)
    model = build_model(cfg.model_kind, cfg.model, seed=cfg.seed)
    if cfg.pretrain_checkpoint:
        tensors, prov = load_checkpoint(cfg.pretrain_checkpoint)
        if prov.get("stage") != "pretrain":
            raise ValueError(f"{cfg.pretrain_checkpoint}: not a pretrain checkpoint")
        transfer(tensors, model)
    curve = train_supervised(model, data_mod.apply_stats(X, stats), y, cfg.epochs, lr=cfg.train.lr,
                             batch_size=cfg.train.batch_size, seed=cfg.seed)
    save_checkpoint(args.out, model.state_dict(),
                    _provenance(cfg, "supervised", stats=stats.to_dict(), loss_curve=curve))
    print(f"trained {cfg.model_kind} for {cfg.epochs} epochs on {len(X)} windows -> {args.out}")
    if args.report:
        _write_text(dumps({"kind": "training", "config_hash": config_hash(cfg.to_dict()),
                           "loss_curve": curve}), args.report)


def cmd_pretrain(args):
    cfg = _run_config(args)
    if args.epochs is not None:
        cfg.pretrain.config.epochs = args.epochs
    state, curve = run_pretrain(cfg)
    save_checkpoint(args.out, state, _provenance(cfg, "pretrain", loss_curve=curve))
    print(f"pre-trained {cfg.model_kind} trunk for {len(curve)} epochs -> {args.out}")
    if args.report:
        _write_text(dumps({"kind": "pretraining", "config_hash": config_hash(cfg.to_dict()),
                           "loss_curve": curve}), args.report)


def cmd_crossval(args):
    cfg = _run_config(args)
    report = crossval(cfg)
    write_report(report, args.out)
    for metric, agg in report["aggregate"].items():
        print(f"{metric:<7} {agg['display']}")


def _config_from_provenance(prov):
    raw = json.loads(json.dumps(prov["config"]))

    def prune(d):
        return {k: prune(v) if isinstance(v, dict) else v for k, v in d.items() if v is not None}

    return from_dict(prune(raw))


def cmd_eval(args):
    tensors, prov = load_checkpoint(args.checkpoint)
    if prov.get("stage") != "supervised":
        raise ValueError(f"{args.checkpoint}: expected a supervised checkpoint, got stage {prov.get('stage')!r}")
    cfg = _config_from_provenance(prov)
    model = build_model(cfg.model_kind, cfg.model, seed=cfg.seed)
    model.load_state_dict(tensors, strict=True)
    X, y = data_mod.window_arrays(data_mod.load_csv(args.data))
    stats = data_mod.StandardizationStats.from_dict(prov["stats"])
    report = evaluate(model, data_mod.apply_stats(X, stats), y, cfg.eval_ks)
    _write_text(dumps({"kind": "evaluation", "checkpoint": prov["config_hash"], "n_windows": len(X),
                       **report.to_dict()}), args.out)


def cmd_equicheck(args):
    cfg = load_config(args.config) if args.config else RunConfig()
    errors = run_suite(cfg, draws=args.draws, seed=args.seed)
    for name, value in errors.items():
        print(f"{name:<12} {'n/a' if value is None else f'{value:.3e}'}")
    if not passed(errors):
        raise RuntimeError("equivariance or gradient check exceeded tolerance")


def cmd_compare(args):
    result = compare(read_report(args.report_a), read_report(args.report_b))
    for row in result["comparisons"]:
        flag = "*" if row["significant"] else ""
        print(f"{row['metric']:<7} U={row['u']:<6g} p={row['p']:.4f}{flag}")
    if args.out:
        _write_text(dumps(result), args.out)


def build_parser():
    p = _Parser(prog="stecnn", description="Scale-translation equivariant CNNs for wave localization.")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    s = sub.add_parser("synth", help="write a synthetic track as CSV")
    s.add_argument("--out", required=True)
    s.add_argument("--config")
    s.add_argument("--length", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--positive-fraction", dest="positive_fraction", type=float)
    s.add_argument("--width-multiplier", dest="width_multiplier", type=float)
    s.set_defaults(func=cmd_synth)

    for name, func, helptext in (("train", cmd_train, "supervised training; writes a checkpoint"),
                                 ("pretrain", cmd_pretrain, "contrastive pre-training of the trunk")):
        t = sub.add_parser(name, help=helptext)
        t.add_argument("--config")
        t.add_argument("--out", required=True, help="checkpoint path")
        t.add_argument("--report", help="write the loss curve as JSON")
        t.add_argument("--epochs", type=int)
        t.add_argument("--seed", type=int)
        if name == "train":
            t.add_argument("--data", help="CSV track (overrides the config)")
        t.set_defaults(func=func)

    c = sub.add_parser("crossval", help="5x2 cross-validation; writes a JSON report")
    c.add_argument("--config")
    c.add_argument("--out", required=True)
    c.add_argument("--seed", type=int)
    c.add_argument("--data")
    c.set_defaults(func=cmd_crossval)

    e = sub.add_parser("eval", help="score a checkpoint on a CSV track")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--out")
    e.set_defaults(func=cmd_eval)

    q = sub.add_parser("equicheck", help="equivariance and gradient checks")
    q.add_argument("--config")
    q.add_argument("--draws", type=int, default=20)
    q.add_argument("--seed", type=int, default=0)
    q.set_defaults(func=cmd_equicheck)

    m = sub.add_parser("compare", help="Mann-Whitney U per metric between two crossval reports")
    m.add_argument("report_a")
    m.add_argument("report_b")
    m.add_argument("--out")
    m.set_defaults(func=cmd_compare)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return 0 if not exc.code else 1
    logging.captureWarnings(True)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except KeyboardInterrupt:
        return 2
    except Exception as exc:  # runtime failures map to exit code 2
        print(f"stecnn {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        logger.debug("traceback", exc_info=True)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
