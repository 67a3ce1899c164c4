import warnings

import numpy as np
import pytest

from stecnn.data import (
    HEADER,
    AltimetryTrack,
    DataFormatError,
    InfeasiblePlacement,
    SyntheticConfig,
    WindowSample,
    fit_stats,
    flatten,
    kfold_5x2,
    load_csv,
    save_csv,
    standardize,
    synthesize,
    window_arrays,
    windowize,
)


def write_rows(path, rows, header=",".join(HEADER)):
    path.write_text(header + "\n" + "".join(",".join(map(str, r)) + "\n" for r in rows))
    return path


def good_rows(n, positives=()):
    return [[12.0 + i, 0.02, 1.5, -0.1, 6, 7.5, int(i in positives)] for i in range(n)]


def labels_track(n, positives=()):
    labels = np.zeros(n, dtype=int)
    labels[list(positives)] = 1
    return AltimetryTrack(np.random.default_rng(n).standard_normal((6, n)), labels)


# CSV

def test_load_csv_happy_path(tmp_path):
    track = load_csv(write_rows(tmp_path / "t.csv", good_rows(32, positives={20})))
    assert track.length == 32
    assert track.features.shape == (6, 32)
    assert track.features[0, 3] == 15.0 and track.features[4, 0] == 6.0
    assert track.labels.sum() == 1 and track.labels[20] == 1


def test_load_csv_missing_columns_named(tmp_path):
    p = tmp_path / "h.csv"
    p.write_text("sigma0,mss,swh\n1,2,3\n")
    with pytest.raises(DataFormatError) as err:
        load_csv(p)
    for col in ("sla", "month", "wind", "label"):
        assert col in str(err.value)


def test_load_csv_bad_label_row_number(tmp_path):
    rows = good_rows(32)
    rows[9][6] = 2
    with pytest.raises(DataFormatError, match="row 11"):
        load_csv(write_rows(tmp_path / "l.csv", rows))


@pytest.mark.parametrize("mutate, match", [
    (lambda r: r.__setitem__(3, ["x"] * 7), "non-numeric"),
    (lambda r: r.__setitem__(3, r[3][:5]), "fields"),
    (lambda r: r[3].__setitem__(4, 13), "month"),
    (lambda r: r[3].__setitem__(4, 2.5), "month"),
    (lambda r: r.__delitem__(slice(16, None)), "at least 16"),
])
def test_load_csv_domain_errors(tmp_path, mutate, match):
    rows = good_rows(32)
    mutate(rows)
    rows = rows[:15] if match == "at least 16" else rows
    with pytest.raises(DataFormatError, match=match):
        load_csv(write_rows(tmp_path / "e.csv", rows))


def test_extra_column_is_rejected(tmp_path):
    p = write_rows(tmp_path / "x.csv", [r + [0] for r in good_rows(16)], header=",".join(HEADER) + ",extra")
    with pytest.raises(DataFormatError, match="extra"):
        load_csv(p)


def test_csv_round_trip_of_synthetic_track(tmp_path):
    track = synthesize(SyntheticConfig(length=512, seed=4))
    save_csv(track, tmp_path / "s.csv")
    back = load_csv(tmp_path / "s.csv")
    np.testing.assert_array_equal(back.features, track.features)
    np.testing.assert_array_equal(back.labels, track.labels)


def test_track_rejects_non_finite():
    f = np.zeros((6, 16))
    f[2, 3] = np.nan
    with pytest.raises(DataFormatError, match="non-finite"):
        AltimetryTrack(f, np.zeros(16))


# standardization

def test_standardize_two_points():
    f = np.ones((6, 2))
    f[0] = [1, 3]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        out, stats = standardize(AltimetryTrack(np.tile(f, 8), np.zeros(16)))
    assert stats.mean[0] == 2 and stats.std[0] == 1
    np.testing.assert_array_equal(out.features[0, :2], [-1, 1])


def test_standardize_idempotent(rng):
    once, _ = standardize(AltimetryTrack(rng.standard_normal((6, 100)) * 5 + 3, np.zeros(100)))
    twice, stats = standardize(once)
    np.testing.assert_allclose(twice.features, once.features, atol=1e-12)
    np.testing.assert_allclose(stats.std, 1, atol=1e-12)


def test_constant_row_zero_with_warning(rng):
    f = rng.standard_normal((6, 20))
    f[4] = 7.0
    with pytest.warns(RuntimeWarning, match="month"):
        out, _ = standardize(AltimetryTrack(f, np.zeros(20)))
    assert not out.features[4].any()
    assert np.isfinite(out.features).all()


def test_supplied_stats_are_applied(rng):
    train = AltimetryTrack(rng.standard_normal((6, 64)) * 2 + 1, np.zeros(64))
    test = AltimetryTrack(rng.standard_normal((6, 32)), np.zeros(32))
    _, stats = standardize(train)
    out, same = standardize(test, stats)
    assert same is stats
    np.testing.assert_allclose(out.features, (test.features - stats.mean[:, None]) / stats.std[:, None])


def test_fit_stats_on_windows_matches_track(rng):
    f = rng.standard_normal((6, 64))
    X, _ = window_arrays(AltimetryTrack(f, np.zeros(64)))
    a, b = fit_stats(f), fit_stats(X)
    np.testing.assert_allclose(a.mean, b.mean, atol=1e-14)
    np.testing.assert_allclose(a.std, b.std, atol=1e-14)


# windows

def test_window_label_offset():
    samples = windowize(labels_track(32, [20]))
    assert [s.y for s in samples] == [0, 5]
    assert all(s.x.shape == (6, 16) for s in samples)


def test_all_negative_windows():
    assert [s.y for s in windowize(labels_track(48))] == [0, 0, 0]


def test_two_positives_in_window_rejected():
    with pytest.raises(DataFormatError, match="window 0"):
        windowize(labels_track(32, [3, 7]))
    with pytest.raises(DataFormatError, match="window 2"):
        windowize(labels_track(64, [1, 35, 40]))


def test_trailing_remainder_dropped():
    t = labels_track(40, [35])
    X, y = window_arrays(t)
    assert X.shape == (2, 6, 16) and list(y) == [0, 0]
    np.testing.assert_array_equal(X[1], t.features[:, 16:32])


def test_window_labels_match_oracle_scan():
    track = synthesize(SyntheticConfig(length=4096, seed=2))
    _, y = window_arrays(track)
    for w, label in enumerate(y):
        raw = track.labels[16 * w:16 * w + 16]
        hits = [k + 1 for k in range(16) if raw[k] == 1]
        assert label == (hits[0] if hits else 0)


def test_flatten():
    assert not flatten(WindowSample(np.zeros((6, 16)), 0)).any()
    x = np.zeros((6, 16))
    x[2, 5] = 1
    assert np.flatnonzero(flatten(x)).tolist() == [37]
    m = np.random.default_rng(0).standard_normal((6, 16))
    np.testing.assert_array_equal(flatten(m).reshape(6, 16), m)


# 5x2 splits

def test_kfold_5x2():
    splits = kfold_5x2(100, seed=3)
    assert len(splits) == 10
    assert all(len(test) == 50 and len(train) == 50 for train, test in splits)
    for r in range(5):
        (_, a), (_, b) = splits[2 * r], splits[2 * r + 1]
        assert set(a) | set(b) == set(range(100)) and not set(a) & set(b)
    again = kfold_5x2(list(range(100)), seed=3)
    assert all((x[0] == y[0]).all() and (x[1] == y[1]).all() for x, y in zip(splits, again))
    counts = np.zeros(100, int)
    for _, test in splits:
        counts[test] += 1
    assert (counts == 5).all()
    with pytest.raises(ValueError):
        kfold_5x2(1)


def test_kfold_odd_count_is_still_a_partition():
    counts = np.zeros(7, int)
    for _, test in kfold_5x2(7, seed=0):
        counts[test] += 1
    assert (counts == 5).all()


# synthesis

def test_synthesize_deterministic():
    a, b = synthesize(SyntheticConfig(length=2048, seed=9)), synthesize(SyntheticConfig(length=2048, seed=9))
    assert a.features.tobytes() == b.features.tobytes() and a.labels.tobytes() == b.labels.tobytes()
    c = synthesize(SyntheticConfig(length=2048, seed=10))
    assert a.features.tobytes() != c.features.tobytes()


def test_synthesize_zero_fraction():
    assert not synthesize(SyntheticConfig(length=1600, positive_fraction=0.0)).labels.any()


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_synthesize_fraction_and_one_positive_per_window(seed):
    track = synthesize(SyntheticConfig(seed=seed))
    lab = track.labels[: track.length // 16 * 16].reshape(-1, 16)
    counts = lab.sum(axis=1)
    assert counts.max() == 1
    assert 0.1855 <= counts.mean() <= 0.2455
    month = track.features[4]
    assert (month == month[0]).all() and 1 <= month[0] <= 12
    assert (track.features[5] >= 0).all()


def test_synthetic_signature_is_visible():
    track = synthesize(SyntheticConfig(length=16000, seed=5))
    pos = np.flatnonzero(track.labels)
    sla = track.features[3]
    # sigma0 peaks just before the wave location and dips after it; SLA is inverted
    assert np.mean(sla[pos + 1] - sla[pos - 1]) > 0
    sigma0 = track.features[0]
    assert np.mean(sigma0[pos + 1] - sigma0[pos - 1]) < 0


def test_width_multiplier_keeps_positions():
    a = synthesize(SyntheticConfig(length=4096, seed=1))
    b = synthesize(SyntheticConfig(length=4096, seed=1, width_multiplier=2.0))
    np.testing.assert_array_equal(a.labels, b.labels)
    assert not np.array_equal(a.features[:4], b.features[:4])


def test_synthesize_errors():
    with pytest.raises(ValueError):
        SyntheticConfig(positive_fraction=1.0)
    with pytest.raises(ValueError):
        SyntheticConfig(length=8)
    with pytest.raises(InfeasiblePlacement):
        synthesize(SyntheticConfig(length=1600, positive_fraction=0.99, min_separation=17))


def test_standardize_then_windowize_keeps_labels():
    track = synthesize(SyntheticConfig(length=3200, seed=6))
    with pytest.warns(RuntimeWarning):
        std, _ = standardize(track)
    assert [s.y for s in windowize(std)] == [s.y for s in windowize(track)]
