"""Pixel grids, label stacks, disc/Gaussian kernels and their convolutions.

Coordinate conventions used throughout the package:

* arrays are indexed (row, col) = (i, j); point coordinates are (x, y)
  with x = column, y = row, and pixel centers at integer coordinates;
* the normalized domain maps the longest grid side to length 1, so the
  normalized coordinate of pixel (i, j) is ((i+0.5)/s, (j+0.5)/s) with
  s = max(H, W);
* multi-channel fields are arrays of shape (P+1, H, W) with channel 0
  the background.
"""

from dataclasses import dataclass, field

import numpy as np

from . import _kernels


@dataclass(frozen=True)
class Grid2D:
    """Image domain of H x W pixels, longest side normalized to length 1."""

    height: int
    width: int

    def __post_init__(self):
        if self.height < 8 or self.width < 8:
            raise ValueError(f"grid must be at least 8x8, got {self.height}x{self.width}")

    @property
    def shape(self):
        return (self.height, self.width)

    @property
    def scale(self) -> int:
        """Pixels per normalized domain unit."""
        return max(self.height, self.width)

    def normalized_coords(self):
        """Per-pixel normalized (y, x) coordinate arrays."""
        s = float(self.scale)
        ys = (np.arange(self.height) + 0.5) / s
        xs = (np.arange(self.width) + 0.5) / s
        return np.meshgrid(ys, xs, indexing="ij")


@dataclass(frozen=True)
class RadialKernel:
    """Uniform averaging kernel supported on the closed disc of integer
    offsets with ||offset||_2 <= radius; all taps carry the same weight and
    the weights sum to 1."""

    radius: int
    offsets: np.ndarray = field(repr=False)   # (n, 2) int64 rows of (dy, dx)
    weight: float
    half_widths: np.ndarray = field(repr=False)  # per-dy run half width

    @property
    def taps(self):
        return [((int(dy), int(dx)), self.weight) for dy, dx in self.offsets]


def make_disc_kernel(radius: int) -> RadialKernel:
    """Uniform disc kernel b_r: equal weights on integer offsets inside the
    closed Euclidean disc of the given pixel radius, normalized to sum 1."""
    if radius < 1:
        raise ValueError(f"kernel radius must be >= 1, got {radius}")
    radius = int(radius)
    rng = np.arange(-radius, radius + 1)
    dy, dx = np.meshgrid(rng, rng, indexing="ij")
    inside = dy * dy + dx * dx <= radius * radius
    offsets = np.stack([dy[inside], dx[inside]], axis=1).astype(np.int64)
    half_widths = np.array(
        [int(np.floor(np.sqrt(radius * radius - d * d))) for d in rng],
        dtype=np.int64,
    )
    return RadialKernel(
        radius=radius,
        offsets=offsets,
        weight=1.0 / len(offsets),
        half_widths=half_widths,
    )


@dataclass(frozen=True)
class GaussianKernel:
    """Disc-truncated Gaussian taps. sigma is given in normalized domain
    units; sigma_px = sigma_norm * max(H, W). Taps cover integer offsets
    with ||offset|| <= ceil(3 * sigma_px) and are renormalized to sum 1."""

    sigma_norm: float
    sigma_px: float
    radius: int
    offsets: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)


def make_gaussian_kernel(sigma_norm: float, grid_scale: int) -> GaussianKernel:
    if sigma_norm <= 0:
        raise ValueError("sigma must be positive")
    sigma_px = sigma_norm * grid_scale
    radius = max(1, int(np.ceil(3.0 * sigma_px)))
    rng = np.arange(-radius, radius + 1)
    dy, dx = np.meshgrid(rng, rng, indexing="ij")
    d2 = (dy * dy + dx * dx).astype(np.float64)
    inside = d2 <= radius * radius
    w = np.exp(-d2[inside] / (2.0 * sigma_px * sigma_px))
    w /= w.sum()
    offsets = np.stack([dy[inside], dx[inside]], axis=1).astype(np.int64)
    return GaussianKernel(
        sigma_norm=float(sigma_norm),
        sigma_px=float(sigma_px),
        radius=radius,
        offsets=offsets,
        weights=w,
    )


SIMPLEX_TOL = 1e-9


@dataclass
class LabelStack:
    """Relaxed indicator field over the grid: (P+1, H, W) values with
    channel 0 the background, each pixel's channel vector on the
    probability simplex."""

    values: np.ndarray
    relaxed: bool = True

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 3 or v.shape[0] < 2:
            raise ValueError("label stack must have shape (P+1, H, W) with P >= 1")
        object.__setattr__(self, "values", v)
        self.validate()

    def validate(self):
        v = self.values
        if not np.all(np.isfinite(v)):
            raise ValueError("label stack contains non-finite values")
        if v.min() < -SIMPLEX_TOL or v.max() > 1.0 + SIMPLEX_TOL:
            raise ValueError("label stack values outside [0, 1]")
        sums = v.sum(axis=0)
        if np.abs(sums - 1.0).max() > SIMPLEX_TOL:
            raise ValueError("label stack channels do not sum to 1")
        if not self.relaxed:
            if not np.all((np.abs(v) < SIMPLEX_TOL) | (np.abs(v - 1.0) < SIMPLEX_TOL)):
                raise ValueError("binary label stack has fractional values")

    @property
    def num_foreground(self) -> int:
        return self.values.shape[0] - 1

    @property
    def grid(self) -> Grid2D:
        return Grid2D(self.values.shape[1], self.values.shape[2])

    def label_map(self) -> np.ndarray:
        """Argmax class index per pixel; ties resolve to the lowest index."""
        return np.argmax(self.values, axis=0)

    @classmethod
    def from_foreground_masks(cls, masks, relaxed=False) -> "LabelStack":
        """Build a stack from boolean foreground masks; background is the
        complement. Overlapping foregrounds are renormalized onto the
        simplex."""
        fg = np.stack([np.asarray(m, dtype=np.float64) for m in masks])
        total = fg.sum(axis=0)
        over = total > 1.0
        if over.any():
            fg[:, over] /= total[over]
            relaxed = True
        bg = np.clip(1.0 - fg.sum(axis=0), 0.0, 1.0)
        return cls(np.concatenate([bg[None], fg]), relaxed=relaxed)


@dataclass
class Pins:
    """Pixels whose channel values are forced: a boolean mask plus the
    one-hot values to emit there. Pinned pixels override both the simplex
    projection and the update belt."""

    mask: np.ndarray     # (H, W) bool
    values: np.ndarray   # (C, H, W), one-hot wherever mask is set

    @classmethod
    def empty(cls, stack_shape) -> "Pins":
        C, H, W = stack_shape
        return cls(mask=np.zeros((H, W), dtype=bool), values=np.zeros((C, H, W)))

    def pin_class(self, rows, cols, class_id):
        """Force the given pixels to the one-hot vector of class_id."""
        self.mask[rows, cols] = True
        self.values[:, rows, cols] = 0.0
        self.values[class_id, rows, cols] = 1.0

    @property
    def count(self) -> int:
        return int(self.mask.sum())


def convolve_scalar(field_2d, kernel, pad_value=0.0, impl=None):
    """Channel-independent convolution: output(x) = sum_o w(o) f(x - o),
    reading pad_value outside the grid. Kernels are symmetric under offset
    negation, so the gather form used internally is identical."""
    if isinstance(kernel, RadialKernel):
        return _kernels.disc_convolve(
            field_2d, kernel.half_widths, kernel.weight, pad_value, impl=impl
        )
    if isinstance(kernel, GaussianKernel):
        return _kernels.tap_convolve(
            field_2d, kernel.offsets, kernel.weights, pad_value, impl=impl
        )
    raise TypeError(f"unsupported kernel type {type(kernel)!r}")


def convolve_stack(u, kernel):
    """Stack convolution with the background convention: channel 0 of the
    output is identically zero (the background is never convolved, which
    makes the convexity constraint vacuous on it); foreground channels are
    convolved with pad 0 (outside the image is background)."""
    u = np.asarray(u, dtype=np.float64)
    out = np.zeros_like(u)
    for i in range(1, u.shape[0]):
        out[i] = convolve_scalar(u[i], kernel, pad_value=0.0)
    return out


def convolve_all_channels(u, kernel):
    """Per-channel scalar convolution of a stack, padding each channel by
    its outside-the-image value (background 1, foreground 0). Used for the
    update-belt test, not for the convexity operator."""
    u = np.asarray(u, dtype=np.float64)
    out = np.empty_like(u)
    out[0] = convolve_scalar(u[0], kernel, pad_value=1.0)
    for i in range(1, u.shape[0]):
        out[i] = convolve_scalar(u[i], kernel, pad_value=0.0)
    return out
