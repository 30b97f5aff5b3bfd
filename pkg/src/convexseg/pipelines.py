"""End-to-end task pipelines shared by the CLI, the service and tests.

Hull solves crop to the point set's bounding box plus a kernel-radius
margin before solving: the exterior is identically background (zero
foreground, empty belt, no pins), so values there can never change and
cropping is exact as long as the margin covers the largest disc radius.
The Gaussian keeps original-grid pixel units via sigma_scale.
"""

from dataclasses import dataclass, replace

import numpy as np

from .dataterm import PointSet, ScribbleSet, assemble_objective
from .errors import ValidationError
from .fields import Grid2D
from .geometry import (
    connected_components,
    convexity_ratio,
    mask_pixel_points,
    quickhull,
    rasterize,
    shape_distance,
)
from .optimizer import AdmmParams, OuterParams, SolveState, initialize, outer_solve


@dataclass
class HullResult:
    mask: np.ndarray          # solved foreground on the full grid
    polygon: np.ndarray       # hull of the solved mask
    baseline: np.ndarray      # quickhull of the input points
    baseline_mask: np.ndarray
    sdist_vs_baseline: float
    excluded: np.ndarray      # input points absent from the solved mask (noisy mode)
    state: SolveState
    crop: tuple


@dataclass
class SegmentationResult:
    labels: np.ndarray        # argmax class map
    masks: list               # per-foreground-class boolean masks
    state: SolveState


def _crop_box(points, grid, margin):
    x0 = max(0, int(np.floor(points[:, 0].min())) - margin)
    x1 = min(grid.width, int(np.ceil(points[:, 0].max())) + margin + 1)
    y0 = max(0, int(np.floor(points[:, 1].min())) - margin)
    y1 = min(grid.height, int(np.ceil(points[:, 1].max())) + margin + 1)
    # keep the solver-meaningful grid minimum
    while x1 - x0 < 8:
        x0 = max(0, x0 - 1)
        x1 = min(grid.width, x1 + 1)
    while y1 - y0 < 8:
        y0 = max(0, y0 - 1)
        y1 = min(grid.height, y1 + 1)
    return x0, x1, y0, y1


def solve_hull(points: PointSet, *, noisy=False, outer: OuterParams = None,
               admm: AdmmParams = None, gamma=10.0, lam=None, sigma=None,
               crop=True, progress=None) -> HullResult:
    """Solve a convex hull task from a point set."""
    grid = points.grid
    outer = outer or OuterParams(schedule="hull")
    if outer.schedule != "hull":
        outer = replace(outer, schedule="hull")
    admm = admm or AdmmParams()
    task = "hull_noisy" if noisy else "hull_clean"

    max_radius = max(outer.radii_override) if outer.radii_override else 21
    margin = max_radius + outer.belt_radius + 1
    if crop:
        x0, x1, y0, y1 = _crop_box(points.points, grid, margin)
    else:
        x0, x1, y0, y1 = 0, grid.width, 0, grid.height
    sub_grid = Grid2D(y1 - y0, x1 - x0)
    sub_points = PointSet(points.points - np.array([x0, y0]), sub_grid)

    objective = assemble_objective(task, points=sub_points, gamma=gamma,
                                   lam=lam, sigma=sigma if sigma is not None else outer.sigma)
    outer = replace(outer, lam=objective.lam,
                    sigma=objective.sigma,
                    sigma_scale=outer.sigma_scale or grid.scale)
    u0 = initialize(task, sub_grid, points=sub_points)
    state = outer_solve(objective, outer, admm, u0, progress=progress)

    mask = np.zeros(grid.shape, dtype=bool)
    mask[y0:y1, x0:x1] = state.u.argmax(axis=0) == 1

    baseline = quickhull(points.points)
    baseline_mask = rasterize(baseline, grid)
    polygon = quickhull(mask_pixel_points(mask)) if mask.any() else np.zeros((0, 2))
    sdist = shape_distance(mask, baseline_mask) if mask.any() else float("inf")

    rows = np.rint(points.points[:, 1]).astype(int)
    cols = np.rint(points.points[:, 0]).astype(int)
    kept = mask[rows, cols]
    excluded = points.points[~kept]
    return HullResult(mask=mask, polygon=polygon, baseline=baseline,
                      baseline_mask=baseline_mask, sdist_vs_baseline=sdist,
                      excluded=excluded, state=state, crop=(x0, x1, y0, y1))


def solve_segmentation(image, scribbles: ScribbleSet, *, outer: OuterParams = None,
                       admm: AdmmParams = None, lam=None, seed=0,
                       max_samples=500, progress=None) -> SegmentationResult:
    """Scribble-driven multi-class segmentation with convexity prior."""
    outer = outer or OuterParams(schedule="segment")
    if outer.schedule != "segment":
        outer = replace(outer, schedule="segment")
    admm = admm or AdmmParams()
    image = np.asarray(image, dtype=np.float64)
    grid = Grid2D(*image.shape[:2])
    objective = assemble_objective("segment", image=image, scribbles=scribbles,
                                   lam=lam if lam is not None else outer.lam,
                                   sigma=outer.sigma, omega=outer.omega,
                                   max_samples=max_samples, seed=seed)
    outer = replace(outer, lam=objective.lam)
    u0 = initialize("segment", grid, scribbles=scribbles)
    state = outer_solve(objective, outer, admm, u0, progress=progress)
    labels = state.u.argmax(axis=0)
    masks = [labels == cid for cid in range(1, state.u.shape[0])]
    return SegmentationResult(labels=labels, masks=masks, state=state)


def component_report(mask) -> list:
    """Convexity ratio (area / hull area) per 8-connected component."""
    labels, count = connected_components(mask)
    out = []
    for cid in range(1, count + 1):
        comp = labels == cid
        out.append({"component": cid, "area": int(comp.sum()),
                    "convexity_ratio": convexity_ratio(comp)})
    return out


@dataclass
class RingResult:
    inner_mask: np.ndarray    # inner background region (pass 1 foreground)
    outer_mask: np.ndarray    # ring plus inner region (pass 2 foreground)
    ring: np.ndarray
    pass1: SegmentationResult
    pass2: SegmentationResult


def solve_ring(image, scribbles_inner: ScribbleSet, scribbles_outer: ScribbleSet,
               *, outer: OuterParams = None, admm: AdmmParams = None,
               seed=0, progress=None) -> RingResult:
    """Two-pass recipe for an annulus with convex boundaries: segment the
    inner background first, then the union of ring and inner background;
    the ring is their difference."""
    try:
        pass1 = solve_segmentation(image, scribbles_inner, outer=outer, admm=admm,
                                   seed=seed, progress=progress)
    except Exception as exc:
        raise ValidationError(f"ring pass 1 (inner background) failed: {exc}") from exc
    try:
        pass2 = solve_segmentation(image, scribbles_outer, outer=outer, admm=admm,
                                   seed=seed, progress=progress)
    except Exception as exc:
        raise ValidationError(f"ring pass 2 (outer boundary) failed: {exc}") from exc
    inner_mask = pass1.labels == 1
    outer_mask = pass2.labels == 1
    ring = outer_mask & ~inner_mask
    return RingResult(inner_mask=inner_mask, outer_mask=outer_mask, ring=ring,
                      pass1=pass1, pass2=pass2)
