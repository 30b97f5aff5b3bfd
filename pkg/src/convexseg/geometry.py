"""Ground-truth geometry tools: quickhull, polygon rasterization, the
digital convexity oracle and the normalized Hausdorff shape distance.

Points are (x, y) with x = column, y = row, and pixel centers at integer
coordinates. Polygons are (m, 2) float arrays in counterclockwise order
(mathematical orientation on the (x, y) plane), starting at the vertex
with the lowest (y, x) for reproducible output files.
"""

import numpy as np
from scipy import ndimage

from .errors import ValidationError
from .fields import Grid2D

_EPS = 1e-12


def _cross(o, a, b):
    return (a[..., 0] - o[0]) * (b[1] - o[1]) - (a[..., 1] - o[1]) * (b[0] - o[0])


def _hull_side(p0, p1, pts):
    """Hull vertices strictly right of the directed segment p0 -> p1 (the
    interior stays on the left, giving a counterclockwise chain), returned
    in traversal order with p0 and p1 excluded."""
    if len(pts) == 0:
        return []
    d = _cross(p0, pts, p1)  # positive = right of p0->p1
    far = pts[int(np.argmax(d))]
    right1 = pts[_cross(p0, pts, far) > _EPS]
    right2 = pts[_cross(far, pts, p1) > _EPS]
    return _hull_side(p0, far, right1) + [far] + _hull_side(far, p1, right2)


def quickhull(points) -> np.ndarray:
    """Convex hull vertices in counterclockwise order; collinear interior
    points are excluded. Degenerate inputs yield degenerate polygons (a
    single point or the two extreme points of a collinear set)."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    if len(pts) == 0:
        raise ValidationError("need at least one point")
    pts = np.unique(pts, axis=0)
    if len(pts) == 1:
        return pts.copy()
    a, b = pts[0], pts[-1]  # lexicographic extremes are always hull vertices
    side = _cross(a, pts, b)  # positive = right of a->b
    right = pts[side > _EPS]
    left = pts[side < -_EPS]
    if len(right) == 0 and len(left) == 0:
        return np.array([a, b])
    verts = [a] + _hull_side(a, b, right) + [b] + _hull_side(b, a, left)
    hull = np.array(verts)
    return _canonical_start(hull)


def _canonical_start(hull):
    order = np.lexsort((hull[:, 0], hull[:, 1]))  # lowest (y, x) first
    return np.roll(hull, -int(order[0]), axis=0)


def hull_is_ccw(hull) -> bool:
    n = len(hull)
    if n < 3:
        return True
    for i in range(n):
        o, a, b = hull[i], hull[(i + 1) % n], hull[(i + 2) % n]
        if (a[0] - o[0]) * (b[1] - a[1]) - (a[1] - o[1]) * (b[0] - a[0]) < -1e-9:
            return False
    return True


def rasterize(poly, grid: Grid2D) -> np.ndarray:
    """Boolean mask of pixels whose integer-coordinate center lies inside
    or on the polygon (even-odd rule). A degenerate segment rasterizes to
    its covered pixel line, a single vertex to one pixel."""
    poly = np.asarray(poly, dtype=np.float64).reshape(-1, 2)
    H, W = grid.shape
    mask = np.zeros((H, W), dtype=bool)
    if len(poly) == 1:
        x, y = poly[0]
        mask[int(round(y)), int(round(x))] = True
        return mask
    if len(poly) == 2:
        _mark_segment(mask, poly[0], poly[1])
        return mask

    xs, ys = poly[:, 0], poly[:, 1]
    x2, y2 = np.roll(xs, -1), np.roll(ys, -1)
    for i in range(max(0, int(np.ceil(ys.min()))), min(H, int(np.floor(ys.max())) + 1)):
        crossings = []
        for ex1, ey1, ex2, ey2 in zip(xs, ys, x2, y2):
            if ey1 == ey2:
                if ey1 == i:  # pixels on horizontal boundary edges
                    lo, hi = sorted((ex1, ex2))
                    j0, j1 = int(np.ceil(lo - 1e-9)), int(np.floor(hi + 1e-9))
                    mask[i, max(0, j0):min(W, j1 + 1)] = True
                continue
            if (ey1 <= i < ey2) or (ey2 <= i < ey1):
                crossings.append(ex1 + (i - ey1) * (ex2 - ex1) / (ey2 - ey1))
        crossings.sort()
        for a, b in zip(crossings[::2], crossings[1::2]):
            j0, j1 = int(np.ceil(a - 1e-9)), int(np.floor(b + 1e-9))
            mask[i, max(0, j0):min(W, j1 + 1)] = True
    # vertices that coincide with pixel centers are on the polygon
    for x, y in poly:
        if abs(x - round(x)) < 1e-9 and abs(y - round(y)) < 1e-9:
            r, c = int(round(y)), int(round(x))
            if 0 <= r < H and 0 <= c < W:
                mask[r, c] = True
    return mask


def _mark_segment(mask, p0, p1):
    H, W = mask.shape
    length = float(np.hypot(*(p1 - p0)))
    n = max(2, int(np.ceil(length * 2)) + 1)
    for t in np.linspace(0.0, 1.0, n):
        x, y = p0 + t * (p1 - p0)
        r, c = int(round(y)), int(round(x))
        if 0 <= r < H and 0 <= c < W:
            mask[r, c] = True


def mask_pixel_points(mask) -> np.ndarray:
    """(x, y) center coordinates of a mask's true pixels."""
    rows, cols = np.where(mask)
    return np.stack([cols, rows], axis=1).astype(np.float64)


def digital_convexity_oracle(mask) -> bool:
    """Brute-force digital convexity: a mask is digitally convex iff it
    equals the rasterization of the convex hull of its own pixel centers."""
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise ValidationError("mask is empty")
    hull = quickhull(mask_pixel_points(mask))
    filled = rasterize(hull, Grid2D(*mask.shape))
    return bool(np.array_equal(filled, mask))


def shape_distance(d_est, d_ref) -> float:
    """Hausdorff distance between two masks normalized by
    2 * sqrt(Area(reference) / pi); the second argument is the reference.
    Distances are Euclidean between pixel centers, computed with exact
    distance transforms."""
    d_est = np.asarray(d_est, dtype=bool)
    d_ref = np.asarray(d_ref, dtype=bool)
    if d_est.shape != d_ref.shape:
        raise ValidationError("masks live on different grids")
    if not d_est.any() or not d_ref.any():
        raise ValidationError("masks must be nonempty")
    to_ref = ndimage.distance_transform_edt(~d_ref)
    to_est = ndimage.distance_transform_edt(~d_est)
    directed = max(float(to_est[d_ref].max()), float(to_ref[d_est].max()))
    return directed / (2.0 * np.sqrt(d_ref.sum() / np.pi))


def connected_components(mask):
    """Labelled 8-connected components of a boolean mask."""
    labels, count = ndimage.label(np.asarray(mask, dtype=bool),
                                  structure=np.ones((3, 3), dtype=int))
    return labels, int(count)


def convexity_ratio(component_mask) -> float:
    """Component area divided by the area of its rasterized convex hull;
    1.0 for digitally convex components."""
    component_mask = np.asarray(component_mask, dtype=bool)
    if not component_mask.any():
        raise ValidationError("component is empty")
    hull = quickhull(mask_pixel_points(component_mask))
    filled = rasterize(hull, Grid2D(*component_mask.shape))
    return float(component_mask.sum()) / float(filled.sum())
