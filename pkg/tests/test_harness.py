import itertools
import json
import math
import struct

import numpy as np
import pytest

from stecnn.data import SyntheticConfig, synthesize, window_arrays
from stecnn.harness import (
    ConfigError,
    RunConfig,
    aggregate,
    compare,
    crossval,
    evaluate,
    load_checkpoint,
    load_config,
    load_into_model,
    mann_whitney_u,
    save_checkpoint,
    train_supervised,
)
from stecnn.harness.checkpoint import CheckpointError
from stecnn.harness.config import DataConfig, TrainConfig, canonical, from_dict
from stecnn.harness.crossval import METRICS, dumps
from stecnn.harness.training import TrainingDiverged, derive_seed
from stecnn.models import EquiOneDCNNConfig, build_model, forward


def tiny_config(**train):
    return RunConfig(
        seed=3,
        model_kind="equi_onedcnn",
        model=EquiOneDCNNConfig(lift_channels=4, gconv_channels=(4,), head_hidden=(8,)),
        train=TrainConfig(**{"epochs": 2, "batch_size": 32, **train}),
        data=DataConfig(synthetic=SyntheticConfig(length=1600, seed=2)),
    )


# Mann-Whitney U

def test_mann_whitney_examples():
    res = mann_whitney_u([1, 2], [3, 4])
    assert res.u == 0 and res.method == "exact"
    assert abs(res.p - 1 / 3) <= 1e-12
    same = mann_whitney_u([1, 2], [1, 2])
    assert same.u == 2 and same.p == 1.0
    low = mann_whitney_u(np.arange(10), np.arange(10) + 100)
    assert low.method == "normal" and low.significant
    with pytest.raises(ValueError):
        mann_whitney_u([], [1])


def exact_oracle(a, b):
    """Enumerate rank subsets with integer arithmetic (inputs distinct)."""
    pooled = sorted(a + b)
    rank = {v: i + 1 for i, v in enumerate(pooled)}
    na, n = len(a), len(a) + len(b)
    u_obs = sum(rank[v] for v in a) - na * (na + 1) // 2
    dev = abs(2 * u_obs - na * len(b))
    hits = total = 0
    for combo in itertools.combinations(range(1, n + 1), na):
        u = sum(combo) - na * (na + 1) // 2
        hits += abs(2 * u - na * len(b)) >= dev
        total += 1
    return hits / total


def test_exact_branch_matches_enumeration_oracle():
    r = np.random.default_rng(0)
    for _ in range(30):
        na, nb = int(r.integers(1, 7)), int(r.integers(1, 6))
        vals = r.permutation(100)[: na + nb].tolist()
        a, b = vals[:na], vals[na:]
        assert abs(mann_whitney_u(a, b).p - exact_oracle(a, b)) <= 1e-12


def test_exact_and_normal_agree_on_6_vs_6():
    r = np.random.default_rng(1)
    for _ in range(50):
        a, b = r.standard_normal(6), r.standard_normal(6) + r.uniform(0, 2)
        ex, approx = mann_whitney_u(a, b, "exact"), mann_whitney_u(a, b, "normal")
        assert ex.u == approx.u
        assert abs(ex.p - approx.p) <= 0.05


def test_normal_branch_matches_scipy():
    stats = pytest.importorskip("scipy.stats")
    r = np.random.default_rng(2)
    for _ in range(20):
        a = np.round(r.standard_normal(15), 1)
        b = np.round(r.standard_normal(12) + 0.5, 1)
        ref = stats.mannwhitneyu(a, b, alternative="two-sided", method="asymptotic", use_continuity=True)
        ours = mann_whitney_u(a, b)
        assert ours.u == ref.statistic
        assert abs(ours.p - ref.pvalue) <= 1e-10


def test_u_statistics_sum_to_product():
    r = np.random.default_rng(3)
    a, b = r.integers(0, 5, 7), r.integers(0, 5, 9)
    assert mann_whitney_u(a, b).u + mann_whitney_u(b, a).u == 63


# checkpoints

def test_checkpoint_round_trip(tmp_path, rng):
    tensors = {"a": rng.standard_normal((2, 3)).astype(np.float32), "b": rng.standard_normal(4),
               "scalar": np.float64(2.5), "idx": np.arange(5, dtype=np.int64)}
    prov = {"stage": "pretrain", "seed": 4, "config_hash": "abc"}
    save_checkpoint(tmp_path / "c.stec", tensors, prov)
    back, p = load_checkpoint(tmp_path / "c.stec")
    assert p == prov and list(back) == list(tensors)
    for k in tensors:
        assert back[k].dtype == np.asarray(tensors[k]).dtype
        assert back[k].tobytes() == np.asarray(tensors[k]).tobytes()


def test_checkpoint_header_layout(tmp_path):
    save_checkpoint(tmp_path / "c", {"w": np.ones(2, dtype=np.float32)}, {})
    blob = (tmp_path / "c").read_bytes()
    assert blob[:4] == b"STEC"
    assert struct.unpack("<I", blob[4:8]) == (1,)


def test_model_round_trip_forward_bitwise(tmp_path, rng):
    model = build_model("equi_resnet", seed=3)
    x = rng.standard_normal((4, 6, 16)).astype(np.float32)
    before = forward(model, x).data
    save_checkpoint(tmp_path / "m", model.state_dict(), {"stage": "supervised"})
    other = build_model("equi_resnet", seed=99)
    assert load_into_model(tmp_path / "m", other) == {"stage": "supervised"}
    assert forward(other, x).data.tobytes() == before.tobytes()


def test_checkpoint_errors(tmp_path):
    save_checkpoint(tmp_path / "ok", {"w": np.ones(3)}, {"stage": "pretrain"})
    blob = (tmp_path / "ok").read_bytes()
    (tmp_path / "magic").write_bytes(b"XXXX" + blob[4:])
    with pytest.raises(CheckpointError, match="not a checkpoint"):
        load_checkpoint(tmp_path / "magic")
    (tmp_path / "short").write_bytes(blob[:-5])
    with pytest.raises(CheckpointError, match="truncated"):
        load_checkpoint(tmp_path / "short")
    (tmp_path / "ver").write_bytes(blob[:4] + struct.pack("<I", 7) + blob[8:])
    with pytest.raises(CheckpointError, match="version 7"):
        load_checkpoint(tmp_path / "ver")
    (tmp_path / "tail").write_bytes(blob + b"\0")
    with pytest.raises(CheckpointError, match="trailing"):
        load_checkpoint(tmp_path / "tail")
    with pytest.raises(CheckpointError, match="dtype"):
        save_checkpoint(tmp_path / "bad", {"c": np.ones(2, dtype=np.complex64)}, {})


def test_load_into_mismatched_model_names_tensor(tmp_path):
    small = build_model("equi_onedcnn", EquiOneDCNNConfig(lift_channels=8), seed=0)
    save_checkpoint(tmp_path / "s", small.state_dict(), {})
    with pytest.raises(Exception, match="trunk.0"):
        load_into_model(tmp_path / "s", build_model("equi_onedcnn", seed=0))


# config

def test_config_toml(tmp_path):
    (tmp_path / "c.toml").write_text(
        'seed = 5\n[model]\nkind = "onedcnn"\nhead_hidden = [32]\n[train]\nepochs = 7\nbatch_size = 16\n'
        '[data]\ncsv = "track.csv"\n[pretrain]\ntemperature = 0.2\n[eval]\nks = [1, 2]\n')
    cfg = load_config(tmp_path / "c.toml")
    assert cfg.seed == 5 and cfg.model_kind == "onedcnn" and cfg.model.head_hidden == (32,)
    assert cfg.epochs == 7 and cfg.train.batch_size == 16
    assert cfg.data.csv == str(tmp_path / "track.csv")
    assert cfg.pretrain.config.temperature == 0.2 and cfg.eval_ks == (1, 2)


@pytest.mark.parametrize("text, match", [
    ("sed = 1\n", "top-level"),
    ("[model]\nkind = \"equi_onedcnn\"\nlift_chanels = 3\n", "lift_chanels"),
    ("[train]\nepochs = -1\n", "epochs"),
    ("[train]\nbatch_size = 0\n", "batch_size"),
    ("[model]\nkind = \"vgg\"\n", "unknown model kind"),
    ("[data.synthetic]\npositive_fraction = 1.5\n", "positive_fraction"),
    ("[eval]\nk = [1]\n", "eval"),
    ("seed = [\n", "c.toml"),
])
def test_config_strictness(tmp_path, text, match):
    (tmp_path / "c.toml").write_text(text)
    with pytest.raises(ConfigError, match=match):
        load_config(tmp_path / "c.toml")


def test_config_defaults_and_round_trip():
    cfg = RunConfig()
    assert cfg.train.lr == 3e-4 and cfg.train.batch_size == 1024
    assert cfg.epochs == 400 and RunConfig(model_kind="mlp").epochs == 200
    assert cfg.data.synthetic.positive_fraction == 0.2155
    for kind in ("equi_onedcnn", "onedcnn", "equi_resnet", "mlp"):
        c = tiny_config() if kind == "equi_onedcnn" else RunConfig(model_kind=kind, seed=9)
        again = from_dict(canonical(c))
        assert again.to_dict() == c.to_dict()


# training

def windows(n=200, seed=0):
    X, y = window_arrays(synthesize(SyntheticConfig(length=16 * n, seed=seed)))
    X = (X - X.mean(axis=(0, 2), keepdims=True)) / (X.std(axis=(0, 2), keepdims=True) + 1e-12)
    return X, y


def test_train_zero_epochs_unchanged():
    X, y = windows(64)
    model = build_model("equi_onedcnn", seed=0)
    before = {k: v.copy() for k, v in model.state_dict().items()}
    assert train_supervised(model, X, y, epochs=0) == []
    assert all(before[k].tobytes() == v.tobytes() for k, v in model.state_dict().items())
    fresh = build_model("equi_onedcnn", seed=0)
    assert evaluate(model, X, y).to_dict() == evaluate(fresh, X, y).to_dict()


def test_train_deterministic():
    X, y = windows(96)
    curves = [train_supervised(build_model("onedcnn", seed=1), X, y, epochs=3, batch_size=32, seed=5)
              for _ in range(2)]
    assert json.dumps(curves[0]) == json.dumps(curves[1])


def test_train_loss_decreases_2000_windows():
    X, y = windows(2000, seed=3)
    curve = train_supervised(build_model("equi_onedcnn", seed=0), X, y, epochs=100, batch_size=1024, seed=0)
    assert len(curve) == 100 and curve[-1] < curve[0]


def test_train_divergence_reports_position():
    X, y = windows(64)
    X[5, 0, 0] = np.inf
    with pytest.raises(Exception, match="epoch 0"):
        train_supervised(build_model("mlp", seed=0), X, y, epochs=1, batch_size=16)
    with pytest.raises(ValueError):
        train_supervised(build_model("mlp", seed=0), X, y[:-1], epochs=1)
    assert issubclass(TrainingDiverged, FloatingPointError)


def test_derive_seed_distinct():
    seeds = {derive_seed(0, i) for i in range(10)}
    assert len(seeds) == 10 and derive_seed(0, 3) == derive_seed(0, 3)
    assert derive_seed(1, 3) != derive_seed(0, 3)


# cross-validation

@pytest.fixture(scope="module")
def tiny_report():
    return crossval(tiny_config())


def test_crossval_structure(tiny_report):
    assert len(tiny_report["splits"]) == 10
    assert [s["split"] for s in tiny_report["splits"]] == list(range(10))
    assert all(s["n_test"] == 50 for s in tiny_report["splits"])
    assert tiny_report["n_windows"] == 100


def test_aggregate_matches_oracle(tiny_report):
    for m, row in tiny_report["aggregate"].items():
        vals = [s["metrics"][m] for s in tiny_report["splits"] if s["metrics"][m] is not None]
        mean = math.fsum(vals) / len(vals)
        std = math.sqrt(math.fsum((v - mean) ** 2 for v in vals) / len(vals))
        assert abs(row["mean"] - mean) <= 1e-12 and abs(row["std"] - std) <= 1e-12
        assert row["display"] == f"{row['mean']:.3f}±{row['std']:.3f}"


def test_aggregate_skips_undefined():
    splits = [{"metrics": {"mauc": None, "g_mean": 0.5}}, {"metrics": {"mauc": 0.7, "g_mean": 1.0}}]
    agg = aggregate(splits)
    assert agg["mauc"]["n"] == 1 and agg["g_mean"]["mean"] == 0.75
    assert "mmcc" not in agg


def test_crossval_deterministic(tiny_report):
    assert dumps(crossval(tiny_config())) == dumps(tiny_report)


def test_compare_identical_reports(tiny_report):
    out = compare(tiny_report, tiny_report)
    assert {c["metric"] for c in out["comparisons"]} <= set(METRICS)
    assert all(c["p"] == 1.0 for c in out["comparisons"])


def test_thread_env_does_not_change_report(tiny_report, monkeypatch):
    monkeypatch.setenv("STECNN_THREADS", "2")
    assert dumps(crossval(tiny_config())) == dumps(tiny_report)
