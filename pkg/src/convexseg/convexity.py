"""Convexity residual, its linearization, violation counts, update belt.

A stack u of indicator functions describes convex foreground regions
exactly when, for every disc radius r,

    (u - 1) * (b_r conv u) - (1/2)(u - 1) >= 0

holds pixelwise per channel (with the background channel exempt via the
stack convolution convention). The residual is quadratic in u, so its
first-order expansion at a reference stack is exact up to the term
(u - u_ref) * (b_r conv (u - u_ref)).
"""

from dataclasses import dataclass

import numpy as np

from .fields import RadialKernel, convolve_all_channels, convolve_stack, make_disc_kernel


def _as_kernels(radii_or_kernels):
    out = []
    for r in radii_or_kernels:
        out.append(r if isinstance(r, RadialKernel) else make_disc_kernel(int(r)))
    return out


def convexity_residual(u, kernel) -> np.ndarray:
    """Per-channel residual (u-1)*(b_r conv u) - (u-1)/2; nonnegative
    everywhere iff the constraint holds at this radius. Channel 0 comes out
    as (1 - u_0)/2 >= 0 by the stack convolution convention."""
    u = np.asarray(u, dtype=np.float64)
    if not isinstance(kernel, RadialKernel):
        kernel = make_disc_kernel(int(kernel))
    bu = convolve_stack(u, kernel)
    return (u - 1.0) * bu - 0.5 * (u - 1.0)


def violation_count(u, radii, tol=1e-6) -> int:
    """Number of (pixel, foreground channel, radius) triples with residual
    below -tol."""
    if tol < 0:
        raise ValueError("tolerance must be nonnegative")
    total = 0
    for kernel in _as_kernels(radii):
        res = convexity_residual(u, kernel)
        total += int(np.count_nonzero(res[1:] < -tol))
    return total


@dataclass
class LinearizedConstraint:
    """First-order expansion of the convexity residual at a reference stack.

    Stacking order is radius-major then channel: block e of apply()'s
    output corresponds to radius radii[e] and holds all P+1 channels.

    apply(u)[e] = (u_ref - 1) * (b_e conv u) + u * w_e - u/2
    offset[e]   = u_ref * w_e - 1/2          with w_e = b_e conv u_ref,

    and the constraint reads apply(u) >= offset. This is the exact
    derivative of the quadratic residual, so for every u

        residual(u) = apply(u) - offset + (u - u_ref) * (b_e conv (u - u_ref))

    holds pointwise per channel.
    """

    u_ref: np.ndarray
    kernels: list
    conv_ref: np.ndarray   # (E, C, H, W): b_e conv u_ref
    offset: np.ndarray     # (E, C, H, W): c_k

    @property
    def radii(self):
        return [k.radius for k in self.kernels]

    def apply(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=np.float64)
        out = np.empty_like(self.conv_ref)
        for e, kernel in enumerate(self.kernels):
            out[e] = ((self.u_ref - 1.0) * convolve_stack(u, kernel)
                      + u * self.conv_ref[e] - 0.5 * u)
        return out

    def adjoint(self, y) -> np.ndarray:
        """Exact adjoint of apply(): the diagonal factor transposes in
        place and the zero-padded symmetric convolution is self-adjoint,
        so each block contributes b_e conv ((u_ref - 1) * y) +
        (w_e - 1/2) * y, summed over radius blocks."""
        y = np.asarray(y, dtype=np.float64)
        out = np.zeros_like(self.u_ref)
        for e, kernel in enumerate(self.kernels):
            out += (convolve_stack((self.u_ref - 1.0) * y[e], kernel)
                    + (self.conv_ref[e] - 0.5) * y[e])
        return out

    def residual_at(self, u) -> np.ndarray:
        """apply(u) - offset, the linearized constraint residual."""
        return self.apply(u) - self.offset

    def operator_norm_sq(self, iters: int = 20) -> float:
        """Power-iteration estimate of ||A||_2^2 via the Gram operator,
        from a fixed seeded start vector for determinism."""
        rng = np.random.default_rng(0)
        x = rng.standard_normal(self.u_ref.shape)
        x /= np.linalg.norm(x)
        lam = 0.0
        for _ in range(iters):
            y = self.adjoint(self.apply(x))
            lam = float(np.linalg.norm(y))
            if lam == 0.0:
                return 0.0
            x = y / lam
        return lam


def linearize(u_ref, radii) -> LinearizedConstraint:
    """Build the linearized convexity constraint at u_ref for the given
    disc radii (radius-major stacking)."""
    kernels = _as_kernels(radii)
    if not kernels:
        raise ValueError("at least one radius is required")
    u_ref = np.asarray(u_ref, dtype=np.float64)
    conv_ref = np.stack([convolve_stack(u_ref, k) for k in kernels])
    offset = u_ref[None] * conv_ref - 0.5
    return LinearizedConstraint(u_ref=u_ref, kernels=kernels, conv_ref=conv_ref, offset=offset)


def narrow_belt(u, belt_radius=3, theta=0.1, literal=False) -> np.ndarray:
    """Boolean mask of pixels allowed to update in the next outer step.

    Selects pixels where the channel-max of |u_i - b_r0 conv u_i| exceeds
    theta, i.e. pixels near region boundaries (the disc average differs
    most from the pointwise value there). `literal=True` flips the
    comparison to < theta for comparison runs. Channels are convolved
    individually with their outside-the-image pad values so a constant
    stack yields an empty belt.
    """
    if not (0.0 < theta < 1.0):
        raise ValueError("theta must lie in (0, 1)")
    kernel = belt_radius if isinstance(belt_radius, RadialKernel) else make_disc_kernel(int(belt_radius))
    u = np.asarray(u, dtype=np.float64)
    gap = np.abs(u - convolve_all_channels(u, kernel)).max(axis=0)
    return (gap < theta) if literal else (gap > theta)
