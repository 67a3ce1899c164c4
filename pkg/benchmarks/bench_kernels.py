"""Compare the compiled and numpy conv1d kernels.

    python3 benchmarks/bench_kernels.py [--repeat 20] [--json out.json]

Times forward and backward passes on shapes seen during training (batch 32
and 1024 windows, 16 positions) plus one end-to-end EquiOneDCNN training
epoch per backend.
"""
import argparse
import json
import sys
import timeit

import numpy as np

from stecnn.models import build_model
from stecnn.numerics import backend
from stecnn.harness.training import train_supervised

SHAPES = [
    # (batch, in, out, kernel, dilation)
    (32, 6, 16, 3, 1),
    (32, 16, 32, 3, 4),
    (1024, 6, 16, 3, 1),
    (1024, 32, 32, 3, 2),
]


def bench_kernel(shape, dtype, repeat):
    B, C, O, K, d = shape
    rng = np.random.default_rng(0)
    x = rng.standard_normal((B, C, 16)).astype(dtype)
    w = rng.standard_normal((O, C, K)).astype(dtype)
    gy = rng.standard_normal((B, O, 16)).astype(dtype)
    row = {"shape": list(shape), "dtype": np.dtype(dtype).name}
    outputs = {}
    for name in backend.BACKENDS:
        backend.use(name)
        fwd = min(timeit.repeat(lambda: backend.conv1d_forward(x, w, d, True), number=5, repeat=repeat)) / 5
        bwd = min(timeit.repeat(lambda: backend.conv1d_backward(x, w, gy, d, True), number=5, repeat=repeat)) / 5
        row[name] = {"forward_ms": fwd * 1e3, "backward_ms": bwd * 1e3}
        outputs[name] = backend.conv1d_forward(x, w, d, True)
    if len(outputs) == 2:
        row["max_abs_diff"] = float(np.max(np.abs(outputs["compiled"] - outputs["python"])))
    return row


def bench_epoch():
    rng = np.random.default_rng(1)
    X = rng.standard_normal((512, 6, 16)).astype(np.float32)
    y = rng.integers(0, 17, 512)
    out = {}
    for name in backend.BACKENDS:
        backend.use(name)
        model = build_model("equi_onedcnn", seed=0)
        out[name] = min(timeit.repeat(lambda: train_supervised(model, X, y, epochs=1, batch_size=32),
                                      number=1, repeat=3))
    return out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--json")
    args = ap.parse_args(argv)
    if "compiled" not in backend.BACKENDS:
        print("compiled kernels not built; only the numpy fallback is timed", file=sys.stderr)
    initial = backend.name()
    rows = [bench_kernel(s, dt, args.repeat) for s in SHAPES for dt in (np.float32, np.float64)]
    epoch = bench_epoch()
    backend.use(initial)

    print(f"{'B,C,O,K,d':<18}{'dtype':<9}{'backend':<10}{'fwd ms':>9}{'bwd ms':>9}")
    for r in rows:
        for name in backend.BACKENDS:
            print(f"{','.join(map(str, r['shape'])):<18}{r['dtype']:<9}{name:<10}"
                  f"{r[name]['forward_ms']:>9.3f}{r[name]['backward_ms']:>9.3f}")
        if "max_abs_diff" in r:
            c, p = r["compiled"], r["python"]
            print(f"{'':<27}speedup fwd x{p['forward_ms'] / c['forward_ms']:.2f}  "
                  f"bwd x{p['backward_ms'] / c['backward_ms']:.2f}  max diff {r['max_abs_diff']:.1e}")
    print("EquiOneDCNN epoch (512 windows, batch 32): "
          + ", ".join(f"{k} {v:.2f}s" for k, v in epoch.items()))
    if args.json:
        with open(args.json, "w") as fh:
            json.dump({"kernels": rows, "epoch_seconds": epoch}, fh, indent=2)


if __name__ == "__main__":
    main()
