"""Backend parity and direct-tap oracles for the hot kernels."""

import numpy as np
import pytest

from convexseg import backend
from convexseg._kernels import disc_convolve, project_columns, tap_convolve
from convexseg.fields import make_disc_kernel, make_gaussian_kernel

needs_numba = pytest.mark.skipif(not backend.HAS_NUMBA, reason="numba not installed")


def naive_tap_sum(field, offsets, weights, pad):
    """Direct-tap reference: output(x) = sum_o w(o) field(x - o)."""
    H, W = field.shape
    out = np.zeros_like(field)
    for (dy, dx), w in zip(offsets, weights):
        for i in range(H):
            for j in range(W):
                si, sj = i - dy, j - dx
                v = field[si, sj] if 0 <= si < H and 0 <= sj < W else pad
                out[i, j] += w * v
    return out


@pytest.mark.parametrize("radius", [1, 2, 3, 5])
@pytest.mark.parametrize("pad", [0.0, 1.0, -0.7])
def test_disc_convolve_matches_direct_tap_sum(rng, radius, pad):
    field = rng.random((14, 17))
    k = make_disc_kernel(radius)
    expected = naive_tap_sum(field, k.offsets, [k.weight] * len(k.offsets), pad)
    got = disc_convolve(field, k.half_widths, k.weight, pad, impl="numpy")
    np.testing.assert_allclose(got, expected, atol=1e-9)


@needs_numba
@pytest.mark.parametrize("radius", [1, 4, 9])
def test_disc_convolve_backend_parity(rng, radius):
    field = rng.random((40, 33))
    k = make_disc_kernel(radius)
    a = disc_convolve(field, k.half_widths, k.weight, 0.3, impl="numpy")
    b = disc_convolve(field, k.half_widths, k.weight, 0.3, impl="numba")
    np.testing.assert_allclose(a, b, atol=1e-12)


def test_tap_convolve_matches_direct_sum(rng):
    field = rng.random((12, 12))
    g = make_gaussian_kernel(0.05, 24)
    expected = naive_tap_sum(field, g.offsets, g.weights, 0.25)
    got = tap_convolve(field, g.offsets, g.weights, 0.25, impl="numpy")
    np.testing.assert_allclose(got, expected, atol=1e-9)


@needs_numba
def test_tap_convolve_backend_parity(rng):
    field = rng.random((30, 41))
    g = make_gaussian_kernel(0.03, 41)
    a = tap_convolve(field, g.offsets, g.weights, 0.0, impl="numpy")
    b = tap_convolve(field, g.offsets, g.weights, 0.0, impl="numba")
    np.testing.assert_allclose(a, b, atol=1e-12)


def simplex_oracle(v):
    """Exhaustive active-set solve: try every support size, keep the KKT
    point. Independent of the production sorted-scan code path."""
    d = len(v)
    order = np.argsort(v)[::-1]
    best = None
    for k in range(1, d + 1):
        support = order[:k]
        t = (v[support].sum() - 1.0) / k
        x = np.maximum(v - t, 0.0)
        on = x > 0
        if abs(x.sum() - 1.0) < 1e-9 and np.all(v[~on] - t <= 1e-12) and np.all(x[on] > -1e-12):
            best = x
    return best


@pytest.mark.parametrize("dim", [2, 3, 5, 8])
def test_project_columns_matches_oracle(rng, dim):
    cols = rng.normal(scale=2.0, size=(dim, 200))
    got = project_columns(cols, impl="numpy")
    for n in range(cols.shape[1]):
        np.testing.assert_allclose(got[:, n], simplex_oracle(cols[:, n]), atol=1e-9)


@needs_numba
def test_project_columns_backend_parity(rng):
    cols = rng.normal(size=(4, 500))
    a = project_columns(cols, impl="numpy")
    b = project_columns(cols, impl="numba")
    np.testing.assert_allclose(a, b, atol=1e-12)


def test_projection_is_on_simplex(rng):
    cols = rng.normal(scale=3.0, size=(6, 300))
    out = project_columns(cols)
    assert out.min() >= 0.0
    np.testing.assert_allclose(out.sum(axis=0), 1.0, atol=1e-9)
