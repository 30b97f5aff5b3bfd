import numpy as np
import pytest

from conftest import random_stack
from convexseg.fields import (
    Grid2D,
    LabelStack,
    Pins,
    convolve_all_channels,
    convolve_scalar,
    convolve_stack,
    make_disc_kernel,
    make_gaussian_kernel,
)


class TestDiscKernel:
    def test_radius_one_has_five_uniform_taps(self):
        k = make_disc_kernel(1)
        assert len(k.offsets) == 5
        assert k.weight == pytest.approx(0.2)
        tap_set = {tuple(o) for o in k.offsets}
        assert tap_set == {(0, 0), (1, 0), (-1, 0), (0, 1), (0, -1)}

    def test_radius_two_has_thirteen_taps(self):
        k = make_disc_kernel(2)
        assert len(k.offsets) == 13
        assert k.weight == pytest.approx(1.0 / 13.0)

    @pytest.mark.parametrize("radius", [1, 2, 3, 7, 13])
    def test_weights_sum_to_one(self, radius):
        k = make_disc_kernel(radius)
        assert len(k.offsets) * k.weight == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("radius", [1, 3, 6])
    def test_tap_set_symmetry(self, radius):
        k = make_disc_kernel(radius)
        taps = {tuple(o) for o in k.offsets}
        assert taps == {(-dy, -dx) for dy, dx in taps}
        assert taps == {(dx, dy) for dy, dx in taps}

    def test_offsets_are_exactly_the_closed_disc(self):
        k = make_disc_kernel(3)
        for dy in range(-4, 5):
            for dx in range(-4, 5):
                assert ((dy, dx) in {tuple(o) for o in k.offsets}) == (dy * dy + dx * dx <= 9)

    def test_rejects_radius_below_one(self):
        with pytest.raises(ValueError):
            make_disc_kernel(0)


class TestGaussianKernel:
    def test_weights_positive_sum_one_radial(self):
        g = make_gaussian_kernel(0.01, 256)
        assert g.sigma_px == pytest.approx(2.56)
        assert g.weights.min() > 0
        assert g.weights.sum() == pytest.approx(1.0, abs=1e-12)
        # radially symmetric: weight depends only on offset norm
        by_norm = {}
        for (dy, dx), w in zip(g.offsets, g.weights):
            by_norm.setdefault(dy * dy + dx * dx, set()).add(round(float(w), 15))
        assert all(len(v) == 1 for v in by_norm.values())

    def test_truncation_radius(self):
        g = make_gaussian_kernel(0.01, 256)
        assert g.radius == int(np.ceil(3 * 2.56))
        assert (g.offsets ** 2).sum(axis=1).max() <= g.radius ** 2


class TestConvolveScalar:
    def test_constant_field_with_matching_pad(self, rng):
        field = np.full((12, 15), 0.7)
        for kernel in (make_disc_kernel(2), make_gaussian_kernel(0.02, 15)):
            out = convolve_scalar(field, kernel, pad_value=0.7)
            np.testing.assert_allclose(out, 0.7, atol=1e-12)

    def test_delta_field_radius_one(self):
        field = np.zeros((21, 21))
        field[10, 10] = 1.0
        out = convolve_scalar(field, make_disc_kernel(1), pad_value=0.0)
        assert out[10, 10] == pytest.approx(0.2)
        for r, c in [(9, 10), (11, 10), (10, 9), (10, 11)]:
            assert out[r, c] == pytest.approx(0.2)
        assert out.sum() == pytest.approx(1.0)

    def test_zero_field_stays_zero(self):
        out = convolve_scalar(np.zeros((10, 10)), make_disc_kernel(3), pad_value=0.0)
        np.testing.assert_array_equal(out, 0.0)

    def test_linearity(self, rng):
        a = rng.random((16, 16))
        b = rng.random((16, 16))
        k = make_disc_kernel(3)
        lhs = convolve_scalar(0.3 * a + 1.7 * b, k, 0.0)
        rhs = 0.3 * convolve_scalar(a, k, 0.0) + 1.7 * convolve_scalar(b, k, 0.0)
        np.testing.assert_allclose(lhs, rhs, atol=1e-12)

    def test_mass_preserved_for_interior_support(self, rng):
        field = np.zeros((30, 30))
        field[10:20, 10:20] = rng.random((10, 10))
        out = convolve_scalar(field, make_disc_kernel(5), pad_value=0.0)
        assert out.sum() == pytest.approx(field.sum(), abs=1e-9)

    def test_flip_commutes(self, rng):
        # sliding-window accumulation order differs under flips, so this
        # holds to machine precision rather than bit-exactly
        field = rng.random((17, 13))
        k = make_disc_kernel(2)
        np.testing.assert_allclose(
            convolve_scalar(field[::-1, ::-1], k, 0.0),
            convolve_scalar(field, k, 0.0)[::-1, ::-1],
            atol=1e-13,
        )

    def test_output_bounds(self, rng):
        field = rng.random((14, 14))
        out = convolve_scalar(field, make_disc_kernel(4), pad_value=0.5)
        lo = min(field.min(), 0.5) - 1e-12
        hi = max(field.max(), 0.5) + 1e-12
        assert out.min() >= lo and out.max() <= hi


class TestConvolveStack:
    def test_all_background_gives_zero(self):
        u = np.zeros((2, 10, 10))
        u[0] = 1.0
        out = convolve_stack(u, make_disc_kernel(2))
        np.testing.assert_array_equal(out, 0.0)

    def test_background_channel_never_convolved(self, rng):
        u = random_stack(rng, channels=3)
        out = convolve_stack(u, make_disc_kernel(3))
        np.testing.assert_array_equal(out[0], 0.0)

    def test_full_foreground_border_decay(self):
        u = np.zeros((2, 20, 20))
        u[1] = 1.0
        r = 3
        out = convolve_stack(u, make_disc_kernel(r))
        interior = out[1, r:-r, r:-r]
        np.testing.assert_allclose(interior, 1.0, atol=1e-12)
        assert out[1, 0, 0] < 1.0

    def test_all_channel_convolution_pads_by_outside_value(self):
        u = np.zeros((2, 12, 12))
        u[0] = 1.0
        out = convolve_all_channels(u, make_disc_kernel(3))
        np.testing.assert_allclose(out[0], 1.0, atol=1e-12)
        np.testing.assert_allclose(out[1], 0.0, atol=1e-12)


class TestGridAndStack:
    def test_grid_minimum_size(self):
        with pytest.raises(ValueError):
            Grid2D(7, 100)
        g = Grid2D(8, 8)
        assert g.scale == 8

    def test_normalized_coords(self):
        g = Grid2D(10, 20)
        yy, xx = g.normalized_coords()
        assert yy[0, 0] == pytest.approx(0.5 / 20)
        assert xx[0, 0] == pytest.approx(0.5 / 20)
        assert xx[0, -1] == pytest.approx(19.5 / 20)

    def test_label_stack_validation(self, rng):
        good = random_stack(rng)
        LabelStack(good)  # no raise
        bad = good.copy()
        bad[0, 0, 0] += 0.1
        with pytest.raises(ValueError):
            LabelStack(bad)
        with pytest.raises(ValueError):
            LabelStack(np.full((2, 8, 8), np.nan))

    def test_binary_flag_enforced(self):
        u = np.zeros((2, 8, 8))
        u[0] = 0.5
        u[1] = 0.5
        with pytest.raises(ValueError):
            LabelStack(u, relaxed=False)

    def test_label_map_tie_breaks_to_lowest_index(self):
        u = np.zeros((3, 8, 8))
        u[0] = u[1] = 0.5
        stack = LabelStack(u)
        assert (stack.label_map() == 0).all()

    def test_from_foreground_masks_renormalizes_overlap(self):
        m1 = np.zeros((8, 8), bool)
        m2 = np.zeros((8, 8), bool)
        m1[2:5, 2:5] = True
        m2[3:6, 3:6] = True
        stack = LabelStack.from_foreground_masks([m1, m2])
        np.testing.assert_allclose(stack.values.sum(axis=0), 1.0, atol=1e-12)

    def test_pins(self):
        pins = Pins.empty((3, 8, 8))
        pins.pin_class(np.array([1, 2]), np.array([3, 4]), 2)
        assert pins.count == 2
        assert pins.values[2, 1, 3] == 1.0 and pins.values[0, 1, 3] == 0.0
