import numpy as np
import pytest

from conftest import disc_mask, random_stack, stack_from_mask
from convexseg.convexity import (
    convexity_residual,
    linearize,
    narrow_belt,
    violation_count,
)
from convexseg.fields import convolve_stack, make_disc_kernel


def lshape_stack(h=44, w=44):
    m = np.zeros((h, w), bool)
    m[10:30, 10:30] = True
    m[10:20, 20:30] = False  # remove a 10x10 corner
    return stack_from_mask(m), m


class TestResidual:
    def test_empty_foreground_residual_is_half(self):
        u = np.zeros((2, 12, 12))
        u[0] = 1.0
        res = convexity_residual(u, 2)
        np.testing.assert_allclose(res[1], 0.5, atol=1e-12)

    def test_background_channel_residual_identity(self, rng):
        u = random_stack(rng, channels=3)
        res = convexity_residual(u, 3)
        np.testing.assert_array_equal(res[0], (1.0 - u[0]) / 2.0)

    @pytest.mark.parametrize("r", [1, 2, 3])
    def test_centered_square_is_feasible(self, r):
        side = 4 * r + 4
        pad = 3 * r + 2
        n = side + 2 * pad
        m = np.zeros((n, n), bool)
        m[pad:pad + side, pad:pad + side] = True
        res = convexity_residual(stack_from_mask(m), r)
        assert res[1].min() >= -1e-9

    def test_lshape_violations_at_reentrant_corner(self):
        u, m = lshape_stack()
        res = convexity_residual(u, 3)[1]
        assert res.min() < 0
        ys, xs = np.where(res < -1e-6)
        # reentrant corner of the cut is at (20, 20) in mask coordinates
        d = np.sqrt((ys - 20.0) ** 2 + (xs - 20.0) ** 2)
        assert d.min() <= 4.0
        assert np.all(d <= 16.0)

    def test_binary_residual_bounds(self, rng):
        m = rng.random((20, 20)) > 0.5
        res = convexity_residual(stack_from_mask(m), 2)
        assert res.min() >= -0.5 - 1e-12
        assert res.max() <= 0.5 + 1e-12


class TestViolationCount:
    def test_digital_disc_has_none(self):
        m = disc_mask(120, 120, 60, 60, 32)
        assert violation_count(stack_from_mask(m), [1, 4, 7, 10, 13]) == 0

    def test_empty_foreground_has_none(self):
        u = np.zeros((2, 16, 16))
        u[0] = 1.0
        assert violation_count(u, [1, 2, 3]) == 0

    def test_lshape_is_caught(self):
        u, _ = lshape_stack()
        assert violation_count(u, [1, 4, 7, 10, 13]) > 0

    def test_rejects_negative_tolerance(self):
        u = np.zeros((2, 8, 8))
        u[0] = 1.0
        with pytest.raises(ValueError):
            violation_count(u, [1], tol=-1.0)


class TestLinearization:
    def test_quadratic_expansion_is_exact(self, rng):
        u_ref = random_stack(rng, channels=3, h=18, w=18)
        u = random_stack(rng, channels=3, h=18, w=18)
        radii = [1, 3]
        lin = linearize(u_ref, radii)
        for e, r in enumerate(radii):
            kernel = make_disc_kernel(r)
            remainder = (u - u_ref) * convolve_stack(u - u_ref, kernel)
            reconstructed = lin.residual_at(u)[e] + remainder
            np.testing.assert_allclose(
                reconstructed[1:], convexity_residual(u, kernel)[1:], atol=1e-12)

    def test_consistency_at_expansion_point(self, rng):
        u_ref = random_stack(rng, channels=2, h=16, w=16)
        lin = linearize(u_ref, [2, 4])
        for e, r in enumerate([2, 4]):
            np.testing.assert_allclose(
                lin.residual_at(u_ref)[e], convexity_residual(u_ref, r), atol=1e-13)

    def test_adjoint_inner_product_identity(self, rng):
        u_ref = random_stack(rng, channels=3, h=14, w=14)
        lin = linearize(u_ref, [1, 2, 5])
        for _ in range(20):
            x = rng.standard_normal(u_ref.shape)
            y = rng.standard_normal((3,) + u_ref.shape)
            lhs = float((lin.apply(x) * y).sum())
            rhs = float((x * lin.adjoint(y)).sum())
            assert lhs == pytest.approx(rhs, abs=1e-10 * (1 + abs(lhs)))

    def test_block_operator_norm_bound(self, rng):
        u_ref = random_stack(rng, channels=2, h=20, w=20)
        lin = linearize(u_ref, [3])
        assert np.sqrt(lin.operator_norm_sq(30)) <= 3.5

    def test_rejects_empty_radii(self, rng):
        with pytest.raises(ValueError):
            linearize(random_stack(rng), [])


class TestNarrowBelt:
    def test_constant_stack_gives_empty_belt(self):
        u = np.zeros((3, 16, 16))
        u[0] = 1.0
        assert not narrow_belt(u, 3, 0.1).any()

    def test_half_plane_belt_width(self):
        u = np.zeros((2, 40, 40))
        u[1, :, 20:] = 1.0
        u[0] = 1.0 - u[1]
        belt = narrow_belt(u, 3, 0.1)
        # the image border also reads as a boundary (outside = background),
        # so measure the contiguous band around the interior edge only
        run = [j for j in range(10, 32) if belt[20, j]]
        width = max(run) - min(run) + 1
        assert 4 <= width <= 8  # about 2 * belt radius
        assert 19 <= np.mean(run) <= 21

    def test_disc_belt_pixel_count(self):
        m = disc_mask(128, 128, 64, 64, 30)
        belt = narrow_belt(stack_from_mask(m), 3, 0.1)
        count = belt.sum()
        assert 2 * np.pi * 30 * 3 <= count <= 2 * np.pi * 30 * 8

    def test_literal_direction_is_complement(self, rng):
        u = random_stack(rng)
        a = narrow_belt(u, 2, 0.2)
        b = narrow_belt(u, 2, 0.2, literal=True)
        gap_zero = ~(a | b)  # pixels exactly at theta belong to neither
        assert not (a & b).any()
        assert (a | b | gap_zero).all()

    def test_rejects_bad_theta(self, rng):
        with pytest.raises(ValueError):
            narrow_belt(random_stack(rng), 3, 0.0)
