import numpy as np
import pytest

from conftest import disc_mask
from convexseg.errors import ValidationError
from convexseg.fields import Grid2D
from convexseg.geometry import (
    connected_components,
    convexity_ratio,
    digital_convexity_oracle,
    hull_is_ccw,
    mask_pixel_points,
    quickhull,
    rasterize,
    shape_distance,
)


def gift_wrap(points):
    """O(nh) reference hull, independent of quickhull."""
    pts = np.unique(np.asarray(points, float), axis=0)
    if len(pts) <= 2:
        return pts
    start = min(range(len(pts)), key=lambda i: (pts[i][1], pts[i][0]))
    hull = [start]
    while True:
        cur = hull[-1]
        cand = 0 if cur != 0 else 1
        for i in range(len(pts)):
            if i == cur:
                continue
            a, b = pts[cand] - pts[cur], pts[i] - pts[cur]
            cross = a[0] * b[1] - a[1] * b[0]
            if cand == cur or cross > 1e-12 or (
                    abs(cross) <= 1e-12
                    and np.linalg.norm(pts[i] - pts[cur]) > np.linalg.norm(pts[cand] - pts[cur])):
                cand = i
        if cand == start:
            break
        hull.append(cand)
        if len(hull) > len(pts):
            raise RuntimeError("gift wrapping failed to close")
    return pts[hull]


class TestQuickhull:
    def test_square_with_interior_point(self):
        pts = [[0, 0], [1, 0], [1, 1], [0, 1], [0.5, 0.5]]
        hull = quickhull(pts)
        assert len(hull) == 4
        assert {tuple(v) for v in hull} == {(0, 0), (1, 0), (1, 1), (0, 1)}

    def test_collinear_points_reduce_to_extremes(self):
        pts = [[i, 2 * i] for i in range(5)]
        hull = quickhull(pts)
        assert len(hull) == 2
        assert {tuple(v) for v in hull} == {(0, 0), (4, 8)}

    def test_single_point(self):
        assert quickhull([[3.0, 4.0]]).tolist() == [[3.0, 4.0]]

    def test_matches_gift_wrapping_on_random_sets(self, rng):
        for _ in range(8):
            pts = rng.normal(size=(200, 2)) * 10
            ours = {tuple(np.round(v, 9)) for v in quickhull(pts)}
            ref = {tuple(np.round(v, 9)) for v in gift_wrap(pts)}
            assert ours == ref

    def test_output_is_ccw_and_idempotent(self, rng):
        pts = rng.random((60, 2)) * 50
        hull = quickhull(pts)
        assert hull_is_ccw(hull)
        again = quickhull(hull)
        assert {tuple(v) for v in again} == {tuple(v) for v in hull}

    def test_canonical_start_vertex(self, rng):
        hull = quickhull(rng.random((40, 2)) * 30)
        ys = hull[:, 1]
        lowest = np.lexsort((hull[:, 0], ys))[0]
        assert lowest == 0

    def test_rejects_empty(self):
        with pytest.raises(ValidationError):
            quickhull(np.zeros((0, 2)))


class TestRasterize:
    def test_integer_rectangle_is_exact(self):
        poly = np.array([[2, 3], [10, 3], [10, 7], [2, 7]], dtype=float)
        mask = rasterize(poly, Grid2D(12, 14))
        expected = np.zeros((12, 14), bool)
        expected[3:8, 2:11] = True
        np.testing.assert_array_equal(mask, expected)

    def test_degenerate_segment_is_one_pixel_line(self):
        mask = rasterize(np.array([[2.0, 2.0], [8.0, 2.0]]), Grid2D(12, 12))
        assert mask.sum() == 7
        assert mask[2, 2:9].all()

    def test_single_vertex(self):
        mask = rasterize(np.array([[5.0, 6.0]]), Grid2D(10, 10))
        assert mask.sum() == 1 and mask[6, 5]

    def test_triangle_area_close_to_analytic(self):
        poly = np.array([[5.0, 5.0], [55.0, 10.0], [20.0, 50.0]])
        area = 0.5 * abs(np.cross(poly[1] - poly[0], poly[2] - poly[0]))
        perim = sum(np.linalg.norm(poly[i] - poly[(i + 1) % 3]) for i in range(3))
        mask = rasterize(poly, Grid2D(64, 64))
        assert abs(mask.sum() - area) <= 2 * perim


class TestDigitalConvexity:
    def test_disc_is_convex(self):
        assert digital_convexity_oracle(disc_mask(60, 60, 30, 30, 20))

    def test_lshape_is_not(self):
        m = np.zeros((40, 40), bool)
        m[5:25, 5:25] = True
        m[5:15, 15:25] = False
        assert not digital_convexity_oracle(m)

    def test_single_pixel(self):
        m = np.zeros((10, 10), bool)
        m[4, 4] = True
        assert digital_convexity_oracle(m)

    def test_empty_mask_rejected(self):
        with pytest.raises(ValidationError):
            digital_convexity_oracle(np.zeros((8, 8), bool))


def brute_hausdorff(a, b):
    pa = mask_pixel_points(a)
    pb = mask_pixel_points(b)
    d2 = ((pa[:, None, :] - pb[None, :, :]) ** 2).sum(-1)
    return max(np.sqrt(d2.min(axis=1)).max(), np.sqrt(d2.min(axis=0)).max())


class TestShapeDistance:
    def test_identical_masks(self):
        m = disc_mask(40, 40, 20, 20, 10)
        assert shape_distance(m, m) == 0.0

    def test_shifted_disc_matches_brute_force(self):
        a = disc_mask(80, 80, 40, 40, 20)
        b = disc_mask(80, 80, 40, 45, 20)
        ref_area = a.sum()
        expected = brute_hausdorff(b, a) / (2 * np.sqrt(ref_area / np.pi))
        got = shape_distance(b, a)
        assert got == pytest.approx(expected, abs=1e-12)
        assert got == pytest.approx(5.0 / (2 * 20.0), abs=1.0 / (2 * 20.0))

    def test_swap_changes_only_normalization(self):
        a = disc_mask(60, 60, 30, 30, 15)
        b = disc_mask(60, 60, 30, 33, 12)
        num_ab = shape_distance(a, b) * 2 * np.sqrt(b.sum() / np.pi)
        num_ba = shape_distance(b, a) * 2 * np.sqrt(a.sum() / np.pi)
        assert num_ab == pytest.approx(num_ba, abs=1e-9)

    def test_rejects_empty_or_mismatched(self):
        m = disc_mask(20, 20, 10, 10, 4)
        with pytest.raises(ValidationError):
            shape_distance(m, np.zeros((20, 20), bool))
        with pytest.raises(ValidationError):
            shape_distance(m, np.zeros((10, 10), bool))


def test_connected_components_and_ratio():
    m = np.zeros((30, 30), bool)
    m[2:10, 2:10] = True
    m[20:28, 20:28] = True
    labels, n = connected_components(m)
    assert n == 2
    assert convexity_ratio(m[0:15, 0:15]) == pytest.approx(1.0)
    lmask = np.zeros((30, 30), bool)
    lmask[2:20, 2:20] = True
    lmask[2:11, 11:20] = False
    # hull adds ~half the cut back: 243 / 283.5
    assert 0.8 < convexity_ratio(lmask) < 0.9
