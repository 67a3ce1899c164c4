import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stecnn.groupconv import (
    GroupConvLayer,
    GroupElement,
    LiftingLayer,
    ScaleGrid,
    check_equivariance,
    dyadic_upsample,
    group_conv,
    lift,
    project,
    scale_kernel,
    shift,
)
from stecnn.numerics import fd_gradcheck, ops

from conftest import t64


def lift_oracle(x, base, S, circular=True):
    """Slice j via an explicit dilated kernel, looping the index formula."""
    B, C, L = x.shape
    out = np.zeros((B, base.shape[0], S, L))
    for j in range(S):
        k = scale_kernel(base, j)
        for u in range(L):
            for m in range(k.shape[-1]):
                v = u + m
                if circular:
                    out[:, :, j, u] += np.einsum("oc,bc->bo", k[:, :, m], x[:, :, v % L])
                elif v < L:
                    out[:, :, j, u] += np.einsum("oc,bc->bo", k[:, :, m], x[:, :, v])
    return out


def gconv_oracle(f, w, circular=True):
    B, C, S, L = f.shape
    O, _, Sk, K = w.shape
    out = np.zeros((B, O, S, L))
    for j in range(S):
        for s in range(Sk):
            if j + s >= S:
                continue
            k = scale_kernel(w[:, :, s, :], j)
            for u in range(L):
                for m in range(k.shape[-1]):
                    v = u + m
                    if circular:
                        out[:, :, j, u] += np.einsum("oc,bc->bo", k[:, :, m], f[:, :, j + s, v % L])
                    elif v < L:
                        out[:, :, j, u] += np.einsum("oc,bc->bo", k[:, :, m], f[:, :, j + s, v])
    return out


def test_scale_grid():
    g = ScaleGrid(4)
    assert g.factors == (1, 2, 4, 8)
    assert all(a < b for a, b in zip(g.factors, g.factors[1:]))
    assert g.support(3) == 17
    with pytest.raises(ValueError):
        ScaleGrid(0)


def test_scale_kernel_examples():
    np.testing.assert_array_equal(scale_kernel(np.array([1, 2, 3]), 1), [1, 0, 2, 0, 3])
    base = np.array([0.5, -1.0, 4.0])
    np.testing.assert_array_equal(scale_kernel(base, 0), base)
    assert scale_kernel(np.array([1, 2, 3]), 2).sum() == 6
    assert scale_kernel(np.ones((2, 3, 3)), 2).shape == (2, 3, 9)
    with pytest.raises(ValueError):
        scale_kernel(base, -1)


def test_group_law_exact():
    r = np.random.default_rng(0)
    elems = [GroupElement(Fraction(int(r.integers(-20, 20)), int(r.integers(1, 5))), Fraction(2) ** int(r.integers(-3, 4)))
             for _ in range(100)]
    e = GroupElement.identity()
    for g in elems:
        assert g * e == g and e * g == g
        assert g * g.inverse() == e and g.inverse() * g == e
    for a, b, c in itertools.islice(itertools.product(elems[:12], repeat=3), 1000):
        assert (a * b) * c == a * (b * c)
        assert (a * b).act(3) == a.act(b.act(3))
    g = GroupElement.from_index(3, 2)
    h = GroupElement.from_index(1, 1)
    assert g * h == GroupElement(4 * 1 + 3, 8)
    assert g.inverse() == GroupElement(Fraction(-3, 4), Fraction(1, 4))
    with pytest.raises(ValueError):
        GroupElement(0, 0)


def test_lift_examples():
    x = t64([[[1, 0, 0, 0]]])
    out = lift(x, t64([[[1, 1]]]), ScaleGrid(2)).data
    np.testing.assert_array_equal(out[0, 0, 0], [1, 0, 0, 1])
    np.testing.assert_array_equal(out[0, 0, 1], [1, 0, 1, 0])
    r = np.random.default_rng(3)
    xr = r.standard_normal((2, 3, 8))
    single = lift(t64(xr), t64(np.ones((1, 3, 1))), ScaleGrid(3)).data
    for j in range(3):
        np.testing.assert_allclose(single[:, 0, j], xr.sum(axis=1))
    assert not lift(t64(np.zeros((1, 2, 16))), t64(r.standard_normal((3, 2, 3))), ScaleGrid(3)).data.any()


def test_lift_support_overflow():
    with pytest.raises(ValueError, match="support"):
        lift(t64(np.zeros((1, 1, 16))), t64(np.zeros((1, 1, 3))), ScaleGrid(4))
    lift(t64(np.zeros((1, 1, 16))), t64(np.zeros((1, 1, 3))), ScaleGrid(4), padding="zero")


@pytest.mark.parametrize("padding", ["circular", "zero"])
def test_lift_and_gconv_match_oracles(rng, padding):
    x = rng.standard_normal((2, 3, 16))
    base = rng.standard_normal((4, 3, 3))
    f = lift(t64(x), t64(base), ScaleGrid(3), padding).data
    np.testing.assert_allclose(f, lift_oracle(x, base, 3, padding == "circular"), atol=1e-12)
    w = rng.standard_normal((5, 4, 2, 3))
    np.testing.assert_allclose(group_conv(t64(f), t64(w), padding).data, gconv_oracle(f, w, padding == "circular"),
                               atol=1e-12)


def test_group_conv_examples(rng):
    f = rng.standard_normal((2, 1, 3, 16))
    w = np.zeros((1, 1, 2, 1))
    w[0, 0, 0, 0] = 1
    np.testing.assert_array_equal(group_conv(t64(f), t64(w)).data, f)
    w = np.zeros((1, 1, 2, 2))
    w[0, 0, 0] = [1, 1]
    np.testing.assert_array_equal(group_conv(t64(np.ones((1, 1, 3, 16))), t64(w)).data, 2)
    assert not group_conv(t64(f), t64(np.zeros((2, 1, 2, 3)))).data.any()
    with pytest.raises(ValueError, match="scale extent"):
        group_conv(t64(f), t64(np.zeros((1, 1, 4, 3))))


def test_group_conv_truncates_top_scale(rng):
    f = rng.standard_normal((1, 1, 3, 8))
    w = np.zeros((1, 1, 2, 1))
    w[0, 0, 1, 0] = 1
    out = group_conv(t64(f), t64(w)).data
    np.testing.assert_array_equal(out[:, :, :2], f[:, :, 1:])
    assert not out[:, :, 2].any()


def test_project_examples():
    f = t64(np.array([[1, 2], [3, 0]], dtype=float)[None, None])
    np.testing.assert_array_equal(project(f, "max").data[0, 0], [3, 2])
    np.testing.assert_array_equal(project(f, "mean").data[0, 0], [2, 1])
    one = np.arange(6.0).reshape(1, 2, 1, 3)
    for mode in ("max", "mean"):
        np.testing.assert_array_equal(project(t64(one), mode).data, one[:, :, 0])
    with pytest.raises(ValueError):
        project(f, "median")


def test_translation_equivariance_every_shift(rng):
    grid = ScaleGrid(3)
    for _ in range(3):
        x = rng.standard_normal((2, 6, 16))
        wl, wg = rng.standard_normal((4, 6, 3)), rng.standard_normal((3, 4, 2, 3))
        f = lift(t64(x), t64(wl), grid).data
        for t in range(16):
            assert check_equivariance(lambda a: lift(a, wl, grid), x, "shift", t) <= 1e-12
            assert check_equivariance(lambda a: group_conv(a, wg), f, "shift", t) <= 1e-12
            assert check_equivariance(lambda a: project(a, "max"), f, "shift", t) <= 1e-12


def test_scale_covariance_of_lift(rng):
    grid = ScaleGrid(3)
    x = rng.standard_normal((2, 6, 16))
    w = rng.standard_normal((4, 6, 3))
    assert check_equivariance(lambda a: lift(a, w, grid), x, "scale") <= 1e-12
    # spelled out at the stated indices
    up = lift(t64(dyadic_upsample(x)), t64(w), grid).data
    base = lift(t64(x), t64(w), grid).data
    for j in range(2):
        np.testing.assert_allclose(up[:, :, j + 1, ::2], base[:, :, j], atol=1e-12)


def test_zero_padding_interior_equivariance(rng):
    x = rng.standard_normal((1, 2, 16))
    w = rng.standard_normal((3, 2, 3))
    layer = lambda a: ops.conv1d(a, w, padding="zero")
    err = check_equivariance(layer, x, "shift", 1, shift_mode="zero", positions=np.arange(1, 14))
    assert err <= 1e-12
    assert check_equivariance(layer, x, "shift", 1, shift_mode="zero") > 1e-6


def test_full_reduction_is_invariant(rng):
    x = rng.standard_normal((2, 3, 16))
    w = rng.standard_normal((4, 3, 3))
    pooled = lambda a: ops.maxpool_axis(project(lift(t64(a), t64(w), ScaleGrid(3)), "max"), 2).data
    ref = pooled(x)
    for t in range(16):
        assert np.max(np.abs(pooled(shift(x, t)) - ref)) <= 1e-12


def test_shift_modes():
    x = np.arange(5.0)
    np.testing.assert_array_equal(shift(x, 2), [3, 4, 0, 1, 2])
    np.testing.assert_array_equal(shift(x, 2, "zero"), [0, 0, 0, 1, 2])
    np.testing.assert_array_equal(shift(x, -1, "zero"), [1, 2, 3, 4, 0])
    np.testing.assert_array_equal(dyadic_upsample(np.array([1, 2])), [1, 1, 2, 2])


def test_gradcheck_lift_and_group_conv(rng):
    grid = ScaleGrid(3)
    x0 = rng.standard_normal((2, 2, 9))
    wl0 = rng.standard_normal((3, 2, 2))
    f0 = rng.standard_normal((2, 3, 3, 9))
    wg0 = rng.standard_normal((2, 3, 2, 3))
    pl = t64(rng.standard_normal((2, 3, 3, 9)))
    pg = t64(rng.standard_normal((2, 2, 3, 9)))
    assert fd_gradcheck(lambda x: ops.sum_(lift(x, t64(wl0), grid) * pl), x0) < 1e-4
    assert fd_gradcheck(lambda w: ops.sum_(lift(t64(x0), w, grid) * pl), wl0) < 1e-4
    assert fd_gradcheck(lambda f: ops.sum_(group_conv(f, t64(wg0)) * pg), f0) < 1e-4
    assert fd_gradcheck(lambda w: ops.sum_(group_conv(t64(f0), w) * pg), wg0) < 1e-4
    pp = t64(rng.standard_normal((2, 3, 9)))
    for mode in ("max", "mean"):
        assert fd_gradcheck(lambda f: ops.sum_(project(f, mode) * pp), f0) < 1e-4


def test_layers_shapes(rng):
    grid = ScaleGrid(3)
    lift_layer = LiftingLayer(6, 4, 3, grid, rng, dtype=np.float64)
    gconv = GroupConvLayer(4, 5, 3, grid, rng, dtype=np.float64)
    f = lift_layer(t64(rng.standard_normal((2, 6, 16))))
    assert f.shape == (2, 4, 3, 16)
    assert gconv(f).shape == (2, 5, 3, 16)
    with pytest.raises(ValueError):
        GroupConvLayer(4, 5, 3, grid, rng, scale_extent=4)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 15), st.integers(1, 3), st.integers(1, 3))
def test_property_lift_equivariance(t, S, K):
    r = np.random.default_rng(t * 31 + S * 7 + K)
    x = r.standard_normal((1, 2, 16))
    w = r.standard_normal((2, 2, K))
    grid = ScaleGrid(S)
    assert check_equivariance(lambda a: lift(a, w, grid), x, "shift", t) <= 1e-12
    assert check_equivariance(lambda a: lift(a, w, grid), x, "scale") <= 1e-12
