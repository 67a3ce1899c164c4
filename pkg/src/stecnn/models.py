"""Window classifiers: (B, 6, 16) windows to 17 class logits."""
import dataclasses
from dataclasses import dataclass

import numpy as np

from . import nn
from .groupconv import GroupConvLayer, LiftingLayer, Projection, ScaleGrid
from .numerics import ops
from .numerics.tensor import DEFAULT_DTYPE, Tensor, no_grad

NUM_FEATURES = 6
WINDOW = 16
NUM_CLASSES = 17

PAPER_BLOCKS = (3, 4, 6, 3)
DESK_BLOCKS = (1, 1, 1, 1)


class NonFiniteActivation(FloatingPointError):
    pass


def _positive(name, values):
    for v in np.atleast_1d(values):
        if not v > 0:
            raise ValueError(f"{name} must be positive, got {values}")


@dataclass
class EquiOneDCNNConfig:
    lift_channels: int = 16
    gconv_channels: tuple = (32, 32)
    kernel_size: int = 3
    num_scales: int = 3
    scale_extent: int = 2
    head_hidden: tuple = (64,)
    padding: str = "circular"
    projection: str = "max"
    # pools the translation axis too, making logits shift-invariant
    pool_translation: bool = False
    zero_init_head: bool = False
    in_channels: int = NUM_FEATURES
    length: int = WINDOW
    num_classes: int = NUM_CLASSES

    def __post_init__(self):
        self.gconv_channels = tuple(self.gconv_channels)
        self.head_hidden = tuple(self.head_hidden)
        _positive("lift_channels", self.lift_channels)
        _positive("gconv_channels", self.gconv_channels)
        _positive("kernel_size", self.kernel_size)
        _positive("num_scales", self.num_scales)
        _positive("scale_extent", self.scale_extent)
        if self.head_hidden:
            _positive("head_hidden", self.head_hidden)
        if self.scale_extent > self.num_scales:
            raise ValueError("scale_extent cannot exceed num_scales")


# the plain CNN baseline shares the width/kernel settings
OneDCNNConfig = EquiOneDCNNConfig


@dataclass
class EquiResNetConfig:
    blocks: tuple = DESK_BLOCKS
    channels: tuple = (16, 32, 64, 128)
    kernel_size: int = 3
    num_scales: int = 3
    scale_extent: int = 2
    padding: str = "circular"
    projection: str = "max"
    zero_init_head: bool = False
    in_channels: int = NUM_FEATURES
    length: int = WINDOW
    num_classes: int = NUM_CLASSES

    def __post_init__(self):
        self.blocks = tuple(self.blocks)
        self.channels = tuple(self.channels)
        _positive("blocks", self.blocks)
        _positive("channels", self.channels)
        if len(self.blocks) != len(self.channels):
            raise ValueError("blocks and channels need one entry per stage")
        if any(b < a for a, b in zip(self.channels, self.channels[1:])):
            raise ValueError("stage channels must be non-decreasing")
        if self.scale_extent > self.num_scales:
            raise ValueError("scale_extent cannot exceed num_scales")

    @classmethod
    def paper(cls, **kw):
        return cls(blocks=PAPER_BLOCKS, **kw)


@dataclass
class MLPConfig:
    hidden: tuple = (512, 256, 128, 64)
    zero_init_head: bool = False
    in_features: int = NUM_FEATURES * WINDOW
    num_classes: int = NUM_CLASSES

    def __post_init__(self):
        self.hidden = tuple(self.hidden)
        _positive("hidden", self.hidden)


class Classifier(nn.Module):
    """A trunk producing features followed by a prediction head.

    The trunk is what contrastive pre-training learns and transfers.
    """

    flatten_input = False
    pool_translation = False

    def features(self, x):
        if self.flatten_input and x.ndim == 3:
            x = ops.flatten(x)
        h = self.trunk(x)
        if self.pool_translation:
            h = ops.maxpool_axis(h, 2)
        return ops.flatten(h) if h.ndim > 2 else h

    def forward(self, x):
        return self.head(self.features(x))


def _head(in_features, hidden, num_classes, rng, dtype, zero_init):
    layers = []
    for h in hidden:
        layers += [nn.Linear(in_features, h, rng, dtype), nn.ReLU()]
        in_features = h
    layers.append(nn.Linear(in_features, num_classes, rng, dtype, zero_init=zero_init))
    return nn.Sequential(*layers)


class EquiOneDCNN(Classifier):
    def __init__(self, cfg, rng, dtype=DEFAULT_DTYPE):
        super().__init__()
        self.cfg = cfg
        grid = ScaleGrid(cfg.num_scales)
        layers = [
            LiftingLayer(cfg.in_channels, cfg.lift_channels, cfg.kernel_size, grid, rng, cfg.padding, dtype),
            nn.BatchNorm(cfg.lift_channels, dtype),
            nn.ReLU(),
        ]
        cin = cfg.lift_channels
        for cout in cfg.gconv_channels:
            layers += [
                GroupConvLayer(cin, cout, cfg.kernel_size, grid, rng, cfg.scale_extent, cfg.padding, dtype),
                nn.BatchNorm(cout, dtype),
                nn.ReLU(),
            ]
            cin = cout
        layers.append(Projection(cfg.projection))
        self.trunk = nn.Sequential(*layers)
        self.pool_translation = cfg.pool_translation
        self.feature_dim = cin if cfg.pool_translation else cin * cfg.length
        self.head = _head(self.feature_dim, cfg.head_hidden, cfg.num_classes, rng, dtype, cfg.zero_init_head)


class OneDCNN(Classifier):
    """EquiOneDCNN with every group layer replaced by a plain conv1d."""

    def __init__(self, cfg, rng, dtype=DEFAULT_DTYPE):
        super().__init__()
        self.cfg = cfg
        layers = []
        cin = cfg.in_channels
        for cout in (cfg.lift_channels, *cfg.gconv_channels):
            layers += [
                nn.Conv1d(cin, cout, cfg.kernel_size, rng, cfg.padding, dtype),
                nn.BatchNorm(cout, dtype),
                nn.ReLU(),
            ]
            cin = cout
        self.trunk = nn.Sequential(*layers)
        self.pool_translation = cfg.pool_translation
        self.feature_dim = cin if cfg.pool_translation else cin * cfg.length
        self.head = _head(self.feature_dim, cfg.head_hidden, cfg.num_classes, rng, dtype, cfg.zero_init_head)


class ResidualBlock(nn.Module):
    """Two group conv + batchnorm + ReLU stages added to a skip path.

    The skip path is the identity, or a 1x1 group conv when widths differ.
    """

    def __init__(self, in_channels, out_channels, kernel_size, grid, rng, scale_extent=2,
                 padding="circular", dtype=DEFAULT_DTYPE):
        super().__init__()
        self.conv1 = GroupConvLayer(in_channels, out_channels, kernel_size, grid, rng, scale_extent, padding, dtype)
        self.bn1 = nn.BatchNorm(out_channels, dtype)
        self.conv2 = GroupConvLayer(out_channels, out_channels, kernel_size, grid, rng, scale_extent, padding, dtype)
        self.bn2 = nn.BatchNorm(out_channels, dtype)
        self.skip = None
        if in_channels != out_channels:
            self.skip = GroupConvLayer(in_channels, out_channels, 1, grid, rng, 1, padding, dtype)

    def forward(self, f):
        h = ops.relu(self.bn1(self.conv1(f)))
        h = ops.relu(self.bn2(self.conv2(h)))
        return h + (f if self.skip is None else self.skip(f))


class EquiResNet(Classifier):
    def __init__(self, cfg, rng, dtype=DEFAULT_DTYPE):
        super().__init__()
        self.cfg = cfg
        grid = ScaleGrid(cfg.num_scales)
        c0 = cfg.channels[0]
        layers = [
            LiftingLayer(cfg.in_channels, c0, cfg.kernel_size, grid, rng, cfg.padding, dtype),
            nn.BatchNorm(c0, dtype),
            nn.ReLU(),
        ]
        cin = c0
        for n_blocks, cout in zip(cfg.blocks, cfg.channels):
            for _ in range(n_blocks):
                layers.append(ResidualBlock(cin, cout, cfg.kernel_size, grid, rng, cfg.scale_extent,
                                            cfg.padding, dtype))
                cin = cout
        layers += [
            GroupConvLayer(cin, cin, cfg.kernel_size, grid, rng, cfg.scale_extent, cfg.padding, dtype),
            Projection(cfg.projection),
        ]
        self.trunk = nn.Sequential(*layers)
        self.feature_dim = cin * cfg.length
        self.head = nn.Sequential(nn.Linear(self.feature_dim, cfg.num_classes, rng, dtype,
                                            zero_init=cfg.zero_init_head))


class MLP(Classifier):
    """Flattened-window baseline; each hidden layer is linear, ReLU, batchnorm."""

    flatten_input = True

    def __init__(self, cfg, rng, dtype=DEFAULT_DTYPE):
        super().__init__()
        self.cfg = cfg
        layers = []
        d = cfg.in_features
        for h in cfg.hidden:
            layers += [nn.Linear(d, h, rng, dtype), nn.ReLU(), nn.BatchNorm(h, dtype)]
            d = h
        self.trunk = nn.Sequential(*layers)
        self.feature_dim = d
        self.head = nn.Sequential(nn.Linear(d, cfg.num_classes, rng, dtype, zero_init=cfg.zero_init_head))


MODEL_KINDS = {
    "equi_onedcnn": (EquiOneDCNN, EquiOneDCNNConfig),
    "onedcnn": (OneDCNN, OneDCNNConfig),
    "equi_resnet": (EquiResNet, EquiResNetConfig),
    "mlp": (MLP, MLPConfig),
}


def _build(kind, cfg, seed, dtype):
    cls, cfg_cls = MODEL_KINDS[kind]
    if cfg is None:
        cfg = cfg_cls()
    elif isinstance(cfg, dict):
        cfg = cfg_cls(**cfg)
    return cls(cfg, np.random.default_rng(seed), dtype)


def build_equi_onedcnn(cfg=None, seed=0, dtype=DEFAULT_DTYPE):
    return _build("equi_onedcnn", cfg, seed, dtype)


def build_onedcnn(cfg=None, seed=0, dtype=DEFAULT_DTYPE):
    return _build("onedcnn", cfg, seed, dtype)


def build_equiresnet(cfg=None, seed=0, dtype=DEFAULT_DTYPE):
    return _build("equi_resnet", cfg, seed, dtype)


def build_mlp(cfg=None, seed=0, dtype=DEFAULT_DTYPE):
    return _build("mlp", cfg, seed, dtype)


def build_model(kind, cfg=None, seed=0, dtype=DEFAULT_DTYPE):
    if kind not in MODEL_KINDS:
        raise ValueError(f"unknown model kind {kind!r}; expected one of {sorted(MODEL_KINDS)}")
    return _build(kind, cfg, seed, dtype)


def config_to_dict(cfg):
    return {k: list(v) if isinstance(v, tuple) else v for k, v in dataclasses.asdict(cfg).items()}


def _check_finite(name, t):
    if not np.all(np.isfinite(t.data)):
        raise NonFiniteActivation(f"non-finite activation after layer {name!r}")


def forward(model, batch):
    """Logits for ``batch``, checking every trunk stage for non-finite values."""
    x = batch if isinstance(batch, Tensor) else Tensor(np.asarray(batch), dtype=model_dtype(model))
    if model.flatten_input and x.ndim == 3:
        x = ops.flatten(x)
    h = x
    for name, layer in model.trunk._children.items():
        h = layer(h)
        _check_finite(f"trunk.{name}", h)
    if model.pool_translation:
        h = ops.maxpool_axis(h, 2)
    if h.ndim > 2:
        h = ops.flatten(h)
    logits = model.head(h)
    _check_finite("head", logits)
    return logits


def model_dtype(model):
    for _, p in model.named_parameters():
        return p.dtype
    return DEFAULT_DTYPE


def predict(model, batch, batch_size=1024):
    """Argmax class per row (ties go to the smallest index), in eval mode."""
    was_training = model.training
    model.eval()
    batch = np.asarray(batch.data if isinstance(batch, Tensor) else batch)
    out = []
    with no_grad():
        for i in range(0, len(batch), batch_size):
            out.append(np.argmax(forward(model, batch[i:i + batch_size]).data, axis=1))
    model.train(was_training)
    return np.concatenate(out) if out else np.zeros(0, dtype=np.int64)


def predict_scores(model, batch, batch_size=1024):
    """Softmax class scores per row, in eval mode."""
    was_training = model.training
    model.eval()
    batch = np.asarray(batch.data if isinstance(batch, Tensor) else batch)
    out = []
    with no_grad():
        for i in range(0, len(batch), batch_size):
            out.append(ops.softmax(forward(model, batch[i:i + batch_size]).data.astype(np.float64), axis=1))
    model.train(was_training)
    return np.concatenate(out) if out else np.zeros((0, NUM_CLASSES))
