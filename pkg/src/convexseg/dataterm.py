"""Objective construction: scribble-driven data terms, hull area/penalty
vectors and the boundary-length terms of the unified model.

The unified objective is  <g, u> + lam * sqrt(pi/sigma) * <u, G conv (1-u)>
subject to the convexity constraint; tasks fill in g and the pinned set:

    segment    g = -ln p (softmax of scribble distances), scribbles pinned
    hull_clean g = (0, 1) area vector, rasterized input points pinned
    hull_noisy g = (0, 1 - gamma * indicator(points)), no pins
"""

from dataclasses import dataclass

import numpy as np

from .errors import MissingScribblesError, ValidationError
from .fields import GaussianKernel, Grid2D, Pins, convolve_all_channels, make_gaussian_kernel

PROB_FLOOR = 1e-12


@dataclass
class ScribbleSet:
    """User-labeled pixels per class, class 0 = background. Stored as
    (n, 2) integer arrays of (row, col); classes must be disjoint."""

    grid: Grid2D
    pixels: dict  # class id -> (n, 2) int array

    def __post_init__(self):
        seen = {}
        for cid, arr in self.pixels.items():
            arr = np.atleast_2d(np.asarray(arr, dtype=np.int64))
            if arr.size and (arr.min() < 0 or arr[:, 0].max() >= self.grid.height
                             or arr[:, 1].max() >= self.grid.width):
                raise ValidationError(f"scribbles of class {cid} fall outside the grid")
            self.pixels[cid] = arr
            for r, c in arr:
                key = (int(r), int(c))
                if key in seen and seen[key] != cid:
                    raise ValidationError(
                        f"pixel {key} scribbled as both class {seen[key]} and {cid}")
                seen[key] = cid

    @property
    def num_classes(self) -> int:
        return max(self.pixels) + 1 if self.pixels else 0

    def require_all_classes(self, count=None):
        count = self.num_classes if count is None else count
        for cid in range(count):
            if cid not in self.pixels or len(self.pixels[cid]) == 0:
                raise MissingScribblesError(f"class {cid} has no scribbles")

    def subsampled(self, max_samples=500, seed=0) -> dict:
        """Per-class scribbles uniformly subsampled to at most max_samples
        pixels (seeded), to bound the O(|R_i| * H * W) distance cost."""
        rng = np.random.default_rng(seed)
        out = {}
        for cid, arr in self.pixels.items():
            if max_samples is not None and len(arr) > max_samples:
                idx = rng.choice(len(arr), size=max_samples, replace=False)
                out[cid] = arr[np.sort(idx)]
            else:
                out[cid] = arr
        return out


@dataclass
class PointSet:
    """Input points for hull tasks, (x, y) real coordinates with x = column
    and pixel centers at integer coordinates."""

    points: np.ndarray
    grid: Grid2D

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=np.float64))
        if pts.size == 0:
            raise ValidationError("point set is empty")
        if not np.all(np.isfinite(pts)):
            raise ValidationError("point set contains non-finite coordinates")
        self.points = pts

    def rasterize(self) -> np.ndarray:
        """Boolean mask with each point mapped to its nearest pixel center;
        duplicate hits collapse."""
        cols = np.rint(self.points[:, 0]).astype(np.int64)
        rows = np.rint(self.points[:, 1]).astype(np.int64)
        if (rows.min() < 0 or cols.min() < 0 or rows.max() >= self.grid.height
                or cols.max() >= self.grid.width):
            raise ValidationError("points fall outside the grid")
        mask = np.zeros(self.grid.shape, dtype=bool)
        mask[rows, cols] = True
        return mask


@dataclass
class Objective:
    """Per-pixel linear cost g (one channel per class), forced pixels, and
    the boundary-length weights."""

    g: np.ndarray
    pins: Pins
    lam: float
    sigma: float


def _intensity_diff(image, ref_value):
    if image.ndim == 2:
        return np.abs(image - ref_value)
    return np.sqrt(((image - ref_value) ** 2).sum(axis=-1))


def scribble_distance(image, scribbles, class_id, omega, samples=None) -> np.ndarray:
    """Distance field d_i of one class: intensity differences summed over
    that class's scribbles, plus omega * squared spatial distance (in
    normalized domain units) for foreground classes only.
    """
    if omega <= 0:
        raise ValidationError("omega must be positive")
    image = np.asarray(image, dtype=np.float64)
    pix = samples if samples is not None else scribbles.pixels.get(class_id)
    if pix is None or len(pix) == 0:
        raise MissingScribblesError(f"class {class_id} has no scribbles")
    H, W = image.shape[:2]
    s = float(max(H, W))
    ii, jj = np.meshgrid(np.arange(H), np.arange(W), indexing="ij")
    d = np.zeros((H, W))
    for r, c in pix:
        d += _intensity_diff(image, image[int(r), int(c)])
        if class_id >= 1:
            d += omega * ((ii - r) ** 2 + (jj - c) ** 2) / (s * s)
    return d


def class_probabilities(image, scribbles, omega, max_samples=500, seed=0) -> np.ndarray:
    """Per-pixel class probabilities: softmax of negated scribble
    distances, computed with a shift for overflow safety."""
    n = scribbles.num_classes
    if n < 2:
        raise MissingScribblesError("need scribbles for at least two classes")
    scribbles.require_all_classes(n)
    sub = scribbles.subsampled(max_samples, seed)
    d = np.stack([scribble_distance(image, scribbles, cid, omega, samples=sub[cid])
                  for cid in range(n)])
    d -= d.min(axis=0, keepdims=True)
    e = np.exp(-d)
    return e / e.sum(axis=0, keepdims=True)


def similarity_field(image, scribbles, omega, max_samples=500, seed=0) -> np.ndarray:
    """Data term f = -ln p, clamped to the probability floor."""
    p = class_probabilities(image, scribbles, omega, max_samples, seed)
    return -np.log(np.clip(p, PROB_FLOOR, 1.0 - PROB_FLOOR))


def length_linear_term(u_ref, kernel: GaussianKernel, lam) -> np.ndarray:
    """Gradient of the linearized boundary-length term:
    lam * sqrt(pi/sigma) * G conv (1 - 2 u_ref) per channel, with each
    channel padded by its outside-the-image value."""
    if lam == 0:
        return np.zeros_like(np.asarray(u_ref, dtype=np.float64))
    scale = lam * np.sqrt(np.pi / kernel.sigma_norm)
    return scale * (1.0 - 2.0 * convolve_all_channels(u_ref, kernel))


def objective_value(u, g, lam, kernel: GaussianKernel = None) -> float:
    """Full (non-linearized) objective <g, u> + lam*sqrt(pi/sigma) *
    sum_i <u_i, G conv (1 - u_i)>; used for the monotonicity diagnostic."""
    u = np.asarray(u, dtype=np.float64)
    val = float((np.asarray(g) * u).sum())
    if lam > 0:
        if kernel is None:
            raise ValidationError("objective with lam > 0 needs a Gaussian kernel")
        smooth = 1.0 - convolve_all_channels(u, kernel)
        val += lam * np.sqrt(np.pi / kernel.sigma_norm) * float((u * smooth).sum())
    return val


def assemble_objective(task, *, grid=None, image=None, scribbles=None, points=None,
                       lam=None, sigma=0.01, omega=0.1, gamma=10.0,
                       max_samples=500, seed=0) -> Objective:
    """Build the objective vector, pins and length weights for a task.

    segment:    g = similarity field, scribbled pixels pinned to their
                class, lam defaults to 2.
    hull_clean: P = 1, g = (0, 1) (area of the foreground), rasterized
                points pinned to foreground, lam = 0.
    hull_noisy: P = 1, g = (0, 1 - gamma * indicator(points)), no pins,
                lam defaults to 1.
    """
    if task == "segment":
        if image is None or scribbles is None:
            raise ValidationError("segment task needs an image and scribbles")
        image = np.asarray(image, dtype=np.float64)
        grid = Grid2D(*image.shape[:2])
        n = scribbles.num_classes
        scribbles.require_all_classes(n)
        g = similarity_field(image, scribbles, omega, max_samples, seed)
        pins = Pins.empty((n, grid.height, grid.width))
        for cid in range(n):
            arr = scribbles.pixels[cid]
            pins.pin_class(arr[:, 0], arr[:, 1], cid)
        return Objective(g=g, pins=pins, lam=2.0 if lam is None else lam, sigma=sigma)

    if task in ("hull_clean", "hull_noisy"):
        if points is None:
            raise ValidationError("hull task needs a point set")
        mask = points.rasterize()
        H, W = mask.shape
        g = np.zeros((2, H, W))
        if task == "hull_clean":
            g[1] = 1.0
            pins = Pins.empty((2, H, W))
            rows, cols = np.where(mask)
            pins.pin_class(rows, cols, 1)
            return Objective(g=g, pins=pins, lam=0.0 if lam is None else lam, sigma=sigma)
        g[1] = 1.0 - gamma * mask
        pins = Pins.empty((2, H, W))
        return Objective(g=g, pins=pins, lam=1.0 if lam is None else lam, sigma=sigma)

    raise ValidationError(f"unknown task {task!r}")
