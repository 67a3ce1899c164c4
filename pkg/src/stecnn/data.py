"""Along-track altimetry records, windows, 5x2 splits and synthetic tracks."""
import csv
import logging
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

logger = logging.getLogger(__name__)

FEATURES = ("sigma0", "mss", "swh", "sla", "month", "wind")
HEADER = FEATURES + ("label",)
WINDOW = 16
NUM_FEATURES = len(FEATURES)


class DataFormatError(ValueError):
    pass


class InfeasiblePlacement(ValueError):
    pass


@dataclass
class AltimetryTrack:
    features: np.ndarray  # (6, N)
    labels: np.ndarray  # (N,) in {0, 1}

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.shape[0] != NUM_FEATURES or self.features.ndim != 2:
            raise DataFormatError(f"features must be (6, N), got {self.features.shape}")
        if self.labels.shape != (self.features.shape[1],):
            raise DataFormatError("labels length does not match features")
        if self.length < WINDOW:
            raise DataFormatError(f"track has {self.length} locations, need at least {WINDOW}")
        if not np.all(np.isfinite(self.features)):
            raise DataFormatError("track contains non-finite values")

    @property
    def length(self):
        return self.features.shape[1]


@dataclass
class StandardizationStats:
    mean: np.ndarray
    std: np.ndarray

    def to_dict(self):
        return {"mean": [float(v) for v in self.mean], "std": [float(v) for v in self.std]}

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["mean"], dtype=np.float64), np.asarray(d["std"], dtype=np.float64))


@dataclass
class WindowSample:
    x: np.ndarray  # (6, 16)
    y: int


def load_csv(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataFormatError(f"{path}: empty file") from None
        if tuple(header) != HEADER:
            missing = [h for h in HEADER if h not in header]
            extra = [h for h in header if h not in HEADER]
            parts = []
            if missing:
                parts.append(f"missing columns {missing}")
            if extra:
                parts.append(f"unexpected columns {extra}")
            if not parts:
                parts.append("columns out of order")
            raise DataFormatError(f"{path}: bad header ({'; '.join(parts)}); expected {','.join(HEADER)}")
        rows = []
        labels = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(HEADER):
                raise DataFormatError(f"{path}: row {lineno} has {len(row)} fields, expected {len(HEADER)}")
            try:
                values = [float(v) for v in row]
            except ValueError:
                raise DataFormatError(f"{path}: row {lineno} has a non-numeric cell") from None
            month = values[4]
            if month != int(month) or not 1 <= month <= 12:
                raise DataFormatError(f"{path}: row {lineno} month {row[4]!r} not an integer in 1..12")
            label = values[6]
            if label not in (0.0, 1.0):
                raise DataFormatError(f"{path}: row {lineno} label {row[6]!r} not in {{0, 1}}")
            rows.append(values[:6])
            labels.append(int(label))
    if len(rows) < WINDOW:
        raise DataFormatError(f"{path}: {len(rows)} rows, need at least {WINDOW}")
    return AltimetryTrack(np.array(rows).T, np.array(labels))


def save_csv(track, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(HEADER)
        for j in range(track.length):
            f = track.features[:, j]
            writer.writerow([repr(float(v)) for v in f[:4]] + [str(int(f[4])), repr(float(f[5])), str(int(track.labels[j]))])


def fit_stats(features):
    """Per-feature mean and population std; ``features`` is (6, N) or windows (n, 6, L)."""
    a = np.asarray(features, dtype=np.float64)
    if a.ndim == 3:
        a = a.transpose(1, 0, 2).reshape(a.shape[1], -1)
    return StandardizationStats(a.mean(axis=1), a.std(axis=1))


def apply_stats(features, stats):
    """(x - mean) / std per feature; rows with std < 1e-12 become zeros."""
    a = np.asarray(features, dtype=np.float64)
    shape = (1, -1, 1) if a.ndim == 3 else (-1, 1)
    degenerate = stats.std < 1e-12
    if np.any(degenerate):
        names = [FEATURES[i] for i in np.flatnonzero(degenerate)]
        warnings.warn(f"constant feature rows standardized to zero: {', '.join(names)}", RuntimeWarning, stacklevel=2)
    safe = np.where(degenerate, 1.0, stats.std)
    out = (a - stats.mean.reshape(shape)) / safe.reshape(shape)
    if np.any(degenerate):
        idx = np.flatnonzero(degenerate)
        if a.ndim == 3:
            out[:, idx, :] = 0.0
        else:
            out[idx, :] = 0.0
    return out


def standardize(track, stats=None):
    """Feature-wise standardization; computes stats from ``track`` unless given."""
    if stats is None:
        stats = fit_stats(track.features)
    return AltimetryTrack(apply_stats(track.features, stats), track.labels.copy()), stats


def window_arrays(track):
    """Non-overlapping windows as arrays X (n, 6, 16) and y (n,).

    y is 0 without a positive, else the 1-based offset of the single positive.
    """
    n = track.length // WINDOW
    used = n * WINDOW
    X = track.features[:, :used].reshape(NUM_FEATURES, n, WINDOW).transpose(1, 0, 2).copy()
    lab = track.labels[:used].reshape(n, WINDOW)
    counts = lab.sum(axis=1)
    bad = np.flatnonzero(counts > 1)
    if bad.size:
        raise DataFormatError(f"window {bad[0]} contains {counts[bad[0]]} positives; at most one allowed")
    y = np.where(counts == 1, np.argmax(lab, axis=1) + 1, 0)
    return X, y.astype(np.int64)


def windowize(track):
    X, y = window_arrays(track)
    return [WindowSample(x, int(label)) for x, label in zip(X, y)]


def flatten(sample):
    x = sample.x if isinstance(sample, WindowSample) else np.asarray(sample)
    return x.reshape(-1)


def kfold_5x2(samples, seed=0):
    """Ten (train, test) index pairs: five seeded halvings, each used both ways."""
    n = samples if isinstance(samples, int) else len(samples)
    if n < 2:
        raise ValueError("need at least two samples")
    rng = np.random.default_rng(seed)
    splits = []
    for _ in range(5):
        perm = rng.permutation(n)
        a = np.sort(perm[: n // 2])
        b = np.sort(perm[n // 2:])
        splits.append((a, b))
        splits.append((b, a))
    return splits


@dataclass
class SyntheticConfig:
    length: int = 32000
    positive_fraction: float = 0.2155
    amplitude: tuple = (1.5, 3.0)  # in units of the feature noise std
    width: tuple = (0.8, 1.2)  # Gaussian-derivative sigma, in locations
    scale_exponents: tuple = (0, 1)  # dyadic width factors 2**e drawn uniformly
    width_multiplier: float = 1.0  # test-time scale perturbation
    ar_coefficient: float = 0.8
    min_separation: int = 4
    seed: int = 0

    def __post_init__(self):
        self.amplitude = tuple(self.amplitude)
        self.width = tuple(self.width)
        self.scale_exponents = tuple(self.scale_exponents)
        if not 0 <= self.positive_fraction < 1:
            raise ValueError("positive_fraction must lie in [0, 1)")
        if self.length < WINDOW:
            raise ValueError(f"length must be at least {WINDOW}")


# per-feature physical baseline, noise scale, and signature polarity for the four wave-sensitive rows
_BASELINE = np.array([12.0, 0.02, 1.8, 0.05])
_NOISE = np.array([0.4, 0.002, 0.15, 0.03])
_POLARITY = np.array([1.0, 0.8, -0.6, -1.0])


def _ar1(rng, n, rows, coef):
    """Unit-variance stationary AR(1) rows."""
    e = rng.standard_normal((rows, n)) * math.sqrt(1 - coef * coef)
    e[:, 0] = rng.standard_normal(rows)
    return lfilter([1.0], [1.0, -coef], e, axis=1)


def _place_positives(rng, n_windows, n_pos, min_sep):
    chosen = np.sort(rng.choice(n_windows, size=n_pos, replace=False)) if n_pos else np.zeros(0, int)
    positions = []
    last = -(10 ** 9)
    for w in chosen:
        lo = max(w * WINDOW, last + min_sep)
        hi = w * WINDOW + WINDOW
        if lo >= hi:
            raise InfeasiblePlacement(f"cannot place a positive in window {w} with separation {min_sep}")
        last = int(rng.integers(lo, hi))
        positions.append(last)
    return np.array(positions, dtype=np.int64)


def synthesize(cfg=None):
    """Synthetic track: AR(1) background plus Gaussian-derivative wave signatures.

    The number of positive windows is round(positive_fraction * windows);
    each holds exactly one positive location.
    """
    cfg = cfg or SyntheticConfig()
    rng = np.random.default_rng(cfg.seed)
    N = cfg.length
    n_windows = N // WINDOW
    n_pos = int(round(cfg.positive_fraction * n_windows))
    positions = _place_positives(rng, n_windows, n_pos, cfg.min_separation)

    noise = _ar1(rng, N, 4, cfg.ar_coefficient)
    signal = np.zeros((4, N))
    t = np.arange(N)
    for p in positions:
        sigma = (rng.uniform(*cfg.width) * 2.0 ** rng.choice(cfg.scale_exponents)
                 * cfg.width_multiplier)
        amp = rng.uniform(*cfg.amplitude)
        lo, hi = max(0, int(p - 5 * sigma) - 1), min(N, int(p + 5 * sigma) + 2)
        d = (t[lo:hi] - p) / sigma
        # peak magnitude 1 at d = -1 / +1, zero crossing at the wave location
        shape = -d * np.exp(0.5 - 0.5 * d * d)
        signal[:, lo:hi] += amp * _POLARITY[:, None] * shape[None, :]

    features = np.empty((NUM_FEATURES, N))
    features[:4] = _BASELINE[:, None] + _NOISE[:, None] * (noise + signal)
    features[4] = float(rng.integers(1, 13))
    features[5] = np.maximum(0.0, 7.0 + 2.0 * _ar1(rng, N, 1, 0.98)[0])
    labels = np.zeros(N, dtype=np.int64)
    labels[positions] = 1
    return AltimetryTrack(features, labels)
