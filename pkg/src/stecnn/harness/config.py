"""Run configuration, loaded strictly from TOML.

Example::

    seed = 0
    [model]
    kind = "equi_onedcnn"
    lift_channels = 16
    [train]
    epochs = 100
    batch_size = 32
    [data.synthetic]
    length = 32000
"""
import dataclasses
import os
import sys
from dataclasses import dataclass, field

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from ..contrastive import PretrainConfig
from ..data import SyntheticConfig
from ..models import MODEL_KINDS


class ConfigError(ValueError):
    pass


DEFAULT_EPOCHS = {"mlp": 200}
DEFAULT_CONV_EPOCHS = 400


@dataclass
class TrainConfig:
    epochs: int = None  # None: 400 for conv models, 200 for the MLP
    lr: float = 3e-4
    batch_size: int = 1024

    def __post_init__(self):
        if self.epochs is not None and self.epochs < 0:
            raise ConfigError("train.epochs must be >= 0")
        if self.batch_size < 1:
            raise ConfigError("train.batch_size must be >= 1")
        if not self.lr > 0:
            raise ConfigError("train.lr must be positive")

    def resolved_epochs(self, kind):
        if self.epochs is not None:
            return self.epochs
        return DEFAULT_EPOCHS.get(kind, DEFAULT_CONV_EPOCHS)


@dataclass
class DataConfig:
    csv: str = None
    synthetic: SyntheticConfig = field(default_factory=SyntheticConfig)
    # "fold": stats from each training fold; "global": stats from all windows before splitting
    standardization: str = "fold"

    def __post_init__(self):
        if self.standardization not in ("fold", "global"):
            raise ConfigError("data.standardization must be 'fold' or 'global'")


@dataclass
class PretrainSection:
    config: PretrainConfig = field(default_factory=PretrainConfig)
    unlabeled_csv: str = None
    unlabeled: SyntheticConfig = field(default_factory=lambda: SyntheticConfig(length=80000, seed=10_000))


@dataclass
class RunConfig:
    seed: int = 0
    model_kind: str = "equi_onedcnn"
    model: object = None
    train: TrainConfig = field(default_factory=TrainConfig)
    data: DataConfig = field(default_factory=DataConfig)
    pretrain: PretrainSection = field(default_factory=PretrainSection)
    pretrain_checkpoint: str = None
    eval_ks: tuple = (1, 3, 5)

    def __post_init__(self):
        if self.model_kind not in MODEL_KINDS:
            raise ConfigError(f"unknown model kind {self.model_kind!r}; expected one of {sorted(MODEL_KINDS)}")
        cfg_cls = MODEL_KINDS[self.model_kind][1]
        if self.model is None:
            self.model = cfg_cls()
        elif isinstance(self.model, dict):
            self.model = _build(cfg_cls, self.model, "model")
        self.eval_ks = tuple(self.eval_ks)

    @classmethod
    def desk(cls, kind="equi_onedcnn", seed=0, **synthetic):
        """Laptop-scale preset: 2,000 synthetic windows, 100 epochs, batch 32."""
        return cls(seed=seed, model_kind=kind, train=TrainConfig(epochs=100, batch_size=32),
                   data=DataConfig(synthetic=SyntheticConfig(length=32000, seed=seed, **synthetic)))

    @property
    def epochs(self):
        return self.train.resolved_epochs(self.model_kind)

    def to_dict(self):
        pre = self.pretrain
        return _jsonable({
            "seed": self.seed,
            "pretrain_checkpoint": self.pretrain_checkpoint,
            "model": {"kind": self.model_kind, **dataclasses.asdict(self.model)},
            "train": dataclasses.asdict(self.train),
            "data": dataclasses.asdict(self.data),
            "pretrain": {**dataclasses.asdict(pre.config), "unlabeled_csv": pre.unlabeled_csv,
                         "unlabeled": dataclasses.asdict(pre.unlabeled)},
            "eval": {"ks": list(self.eval_ks)},
        })


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def _build(cls, values, where):
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(values) - names)
    if unknown:
        raise ConfigError(f"unknown key(s) in [{where}]: {', '.join(unknown)}")
    try:
        return cls(**values)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{where}]: {exc}") from None


def _take(d, key, where):
    value = d.pop(key, {})
    if not isinstance(value, dict):
        raise ConfigError(f"[{where}.{key}] must be a table")
    return value


def _resolve(path, base):
    if path is None or os.path.isabs(path) or base is None:
        return path
    return os.path.normpath(os.path.join(base, path))


def from_dict(raw, base_dir=None):
    """Build a RunConfig from the nested dict layout of the TOML file."""
    raw = dict(raw)
    model = dict(_take(raw, "model", ""))
    kind = model.pop("kind", "equi_onedcnn")
    train = _build(TrainConfig, _take(raw, "train", ""), "train")

    data_raw = dict(_take(raw, "data", ""))
    synth = _build(SyntheticConfig, _take(data_raw, "synthetic", "data"), "data.synthetic")
    data = _build(DataConfig, {**data_raw, "synthetic": synth}, "data")
    data.csv = _resolve(data.csv, base_dir)

    pre_raw = dict(_take(raw, "pretrain", ""))
    unl_raw = _take(pre_raw, "unlabeled", "pretrain")
    unlabeled_csv = _resolve(pre_raw.pop("unlabeled_csv", None), base_dir)
    unlabeled = _build(SyntheticConfig, {"length": 80000, "seed": 10_000, **unl_raw}, "pretrain.unlabeled")
    pre = PretrainSection(_build(PretrainConfig, pre_raw, "pretrain"), unlabeled_csv, unlabeled)

    ev = dict(_take(raw, "eval", ""))
    ks = ev.pop("ks", [1, 3, 5])
    if ev:
        raise ConfigError(f"unknown key(s) in [eval]: {', '.join(sorted(ev))}")

    seed = raw.pop("seed", 0)
    ckpt = _resolve(raw.pop("pretrain_checkpoint", None), base_dir)
    if raw:
        raise ConfigError(f"unknown top-level key(s): {', '.join(sorted(raw))}")
    try:
        return RunConfig(seed=seed, model_kind=kind, model=model, train=train, data=data,
                         pretrain=pre, pretrain_checkpoint=ckpt, eval_ks=ks)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None


def load_config(path):
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return from_dict(raw, base_dir=os.path.dirname(os.path.abspath(path)))


def canonical(cfg):
    """Nested dict form; round-trips through ``from_dict``."""
    d = cfg.to_dict()
    d["pretrain"] = {k: v for k, v in d["pretrain"].items() if v is not None}
    if d["data"].get("csv") is None:
        d["data"].pop("csv", None)
    if d["pretrain_checkpoint"] is None:
        d.pop("pretrain_checkpoint")
    if d["train"]["epochs"] is None:
        d["train"].pop("epochs")
    return d
