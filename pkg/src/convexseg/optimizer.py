"""Inner proximal ADMM and the outer relinearization loop.

The inner solver handles one linearized subproblem

    min <u, g'> + indicator(simplex, pins, belt)   s.t.  A u - v = c, v >= 0

with the proximal u-step metric S = alpha*I - mu*A^T A, which makes the
u-update a single projection:

    xi = u - (A^T(mu*(A u - v - c) + z) + g') / alpha
    u  <- project(xi)        (pins win, frozen outside the belt, simplex)
    v  <- max(0, A u - c + z/mu)
    z  <- z + tau*mu*(A u - v - c)

The outer loop relinearizes at the current iterate, rebuilds the length
term gradient, restricts updates to the boundary belt and re-runs the
inner solver for a small budget, checking relative change every
`check_stride` outer iterations.
"""

import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels
from .convexity import LinearizedConstraint, linearize, narrow_belt, violation_count
from .dataterm import Objective, length_linear_term, objective_value
from .errors import MissingScribblesError, NumericalDivergenceError, ValidationError
from .fields import LabelStack, Pins, make_disc_kernel, make_gaussian_kernel
from .geometry import quickhull, rasterize

TAU_MAX = (1.0 + np.sqrt(5.0)) / 2.0


@dataclass(frozen=True)
class AdmmParams:
    """Inner solver parameters. alpha may be "paper" (1 + mu), "safe"
    (1.01 * mu * ||A||^2 estimated by power iteration, which keeps the
    proximal metric positive semidefinite) or an explicit float."""

    mu: float = 1.0
    tau: float = 1.0
    alpha: object = "safe"
    max_iter: int = 5000
    kkt_tol: float = 1e-5
    power_iters: int = 20

    def __post_init__(self):
        if self.mu <= 0:
            raise ValidationError(f"mu must be positive, got {self.mu}")
        if not (0.0 < self.tau < TAU_MAX):
            raise ValidationError(f"tau must lie in (0, {TAU_MAX:.6f}), got {self.tau}")
        if self.max_iter < 1:
            raise ValidationError("max_iter must be >= 1")
        if isinstance(self.alpha, str):
            if self.alpha not in ("paper", "safe"):
                raise ValidationError(f"alpha must be 'paper', 'safe' or a number, got {self.alpha!r}")
        elif float(self.alpha) <= 0:
            raise ValidationError("explicit alpha must be positive")

    def resolve_alpha(self, lin: LinearizedConstraint) -> float:
        if self.alpha == "paper":
            return 1.0 + self.mu
        if self.alpha == "safe":
            return 1.01 * self.mu * lin.operator_norm_sq(self.power_iters)
        return float(self.alpha)


@dataclass(frozen=True)
class OuterParams:
    """Outer loop parameters.

    warm_duals keeps the inner solver's (v, z) across outer iterations
    while the radii set is unchanged, so constraint pressure persists
    through relinearizations; without it each inner run rebuilds its
    multipliers from zero and constraint-driven filling slows by an order
    of magnitude. sigma_scale overrides the pixel scale of the Gaussian
    (used by cropped solves to keep sigma in original-image units).
    """

    lam: float = 2.0
    sigma: float = 0.01
    theta: float = 0.1
    belt_radius: int = 3
    omega: float = 0.1
    eps: float = 1e-3
    schedule: str = "segment"
    check_stride: int = 100
    max_outer: int = 5000
    inner_budget: int = 10
    radii_override: tuple = None
    belt_literal: bool = False
    warm_duals: bool = True
    sigma_scale: int = None

    def __post_init__(self):
        if self.schedule not in ("segment", "hull"):
            raise ValidationError(f"unknown schedule kind {self.schedule!r}")
        for name in ("lam", "sigma", "theta", "omega", "eps"):
            if getattr(self, name) < 0:
                raise ValidationError(f"{name} must be nonnegative")
        if self.check_stride < 1 or self.inner_budget < 1 or self.max_outer < 1:
            raise ValidationError("strides and budgets must be >= 1")

    def schedule_phases(self) -> int:
        """Number of distinct radii sets the schedule cycles through."""
        if self.radii_override:
            return 1
        return 7 if self.schedule == "segment" else 10


@dataclass
class InnerResult:
    u: np.ndarray
    v: np.ndarray
    z: np.ndarray
    iterations: int
    primal_residual: float
    converged: bool


@dataclass
class OuterRecord:
    k: int
    objective: float
    violations: int
    belt_px: int
    err: float = None
    elapsed: float = 0.0


@dataclass
class SolveState:
    """Iterate bundle of the outer loop: current stack u, the inner
    solver's slack v and multiplier z, completed outer count k and the
    per-iteration history."""

    u: np.ndarray
    v: np.ndarray
    z: np.ndarray
    k: int
    history: list = field(default_factory=list)
    converged: bool = False
    hit_cap: bool = False
    canceled: bool = False


def project_simplex(xi) -> np.ndarray:
    """Euclidean projection of one vector onto the probability simplex."""
    xi = np.asarray(xi, dtype=np.float64)
    return _kernels.project_columns(xi.reshape(-1, 1))[:, 0]


def pinned_project(xi, pins: Pins, belt, u_prev) -> np.ndarray:
    """Per-pixel projection: pinned pixels emit their forced one-hot
    values, pixels outside the belt keep their previous values, the rest
    project onto the simplex. Pins win over the belt."""
    out = np.array(u_prev, dtype=np.float64, copy=True)
    free = belt & ~pins.mask
    if free.any():
        out[:, free] = _kernels.project_columns(xi[:, free])
    if pins.mask.any():
        out[:, pins.mask] = pins.values[:, pins.mask]
    return out


def admm_solve(lin: LinearizedConstraint, grad, params: AdmmParams, pins: Pins,
               belt, u0, v0=None, z0=None, alpha=None) -> InnerResult:
    """Run the inner proximal ADMM on one linearized subproblem.

    Starts from (u0, v0=0, z0=0) unless warm values are given. Stops at
    params.max_iter, or earlier once both the primal residual
    ||A u - v - c|| and the slack movement ||v - v_prev|| fall below
    kkt_tol * (1 + ||c||).
    """
    u = np.array(u0, dtype=np.float64, copy=True)
    c = lin.offset
    v = np.zeros_like(c) if v0 is None else np.array(v0, dtype=np.float64, copy=True)
    z = np.zeros_like(c) if z0 is None else np.array(z0, dtype=np.float64, copy=True)
    if alpha is None:
        alpha = params.resolve_alpha(lin)
    mu, tau = params.mu, params.tau
    stop_scale = params.kkt_tol * (1.0 + float(np.linalg.norm(c)))

    Au = lin.apply(u)
    primal = float(np.linalg.norm(Au - v - c))
    iterations = 0
    converged = False
    for j in range(params.max_iter):
        xi = u - (lin.adjoint(mu * (Au - v - c) + z) + grad) / alpha
        u = pinned_project(xi, pins, belt, u)
        Au = lin.apply(u)
        s = Au - c
        v_new = np.maximum(0.0, s + z / mu)
        z = z + tau * mu * (s - v_new)
        if not np.isfinite(u).all():
            raise NumericalDivergenceError(j, "stack iterate")
        primal = float(np.linalg.norm(s - v_new))
        v_move = float(np.linalg.norm(v_new - v))
        v = v_new
        iterations = j + 1
        if primal < stop_scale and v_move < stop_scale:
            converged = True
            break
    return InnerResult(u=u, v=v, z=z, iterations=iterations,
                       primal_residual=primal, converged=converged)


def kkt_residuals(lin: LinearizedConstraint, grad, u, v, z, pins: Pins, belt) -> dict:
    """Normalized KKT residuals of the linearized subproblem: primal
    feasibility, stationarity of u (natural projection residual) and
    stationarity of the slack v against the multiplier sign/complementarity
    condition."""
    c = lin.offset
    primal = np.linalg.norm(lin.apply(u) - v - c) / (1.0 + np.linalg.norm(c))
    step = u - (lin.adjoint(z) + grad)
    stat_u = np.linalg.norm(u - pinned_project(step, pins, belt, u)) / (1.0 + np.linalg.norm(u))
    stat_v = np.linalg.norm(v - np.maximum(0.0, v + z)) / (1.0 + np.linalg.norm(v))
    return {"primal": float(primal), "stationarity_u": float(stat_u),
            "stationarity_v": float(stat_v)}


def radii_schedule(k: int, kind: str) -> list:
    """Cycling disc radii for outer iteration k. Segmentation uses three
    radii mod 14, hull computation five radii mod 22; the base offset
    advances by 2 every 100 outer iterations. All values are odd, so the
    results are always >= 1."""
    if kind == "segment":
        l = 2 * ((k // 100) % 7)
        return [(l + off) % 14 for off in (1, 3, 5)]
    if kind == "hull":
        l = 2 * ((k // 100) % 10)
        return [(l + off) % 22 for off in (1, 3, 5, 7, 9)]
    raise ValidationError(f"unknown schedule kind {kind!r}")


def relative_change(u_now, u_then) -> float:
    """Frobenius norm ratio ||u_now - u_then|| / ||u_then|| over all
    channels."""
    denom = float(np.linalg.norm(u_then))
    return float(np.linalg.norm(np.asarray(u_now) - np.asarray(u_then))) / denom


def initialize(task, grid, scribbles=None, points=None) -> np.ndarray:
    """Initial stack u^0. Segmentation starts each foreground channel at
    the rasterized convex hull of its scribbles (background takes the
    rest); hull tasks start at the indicator of the rasterized point set.
    """
    if task == "segment":
        if scribbles is None:
            raise MissingScribblesError("segmentation needs scribbles")
        n = scribbles.num_classes
        scribbles.require_all_classes(n)
        masks = []
        for cid in range(1, n):
            arr = scribbles.pixels[cid]
            hull = quickhull(np.stack([arr[:, 1], arr[:, 0]], axis=1).astype(np.float64))
            masks.append(rasterize(hull, grid))
        return LabelStack.from_foreground_masks(masks).values
    if task in ("hull_clean", "hull_noisy"):
        if points is None:
            raise ValidationError("hull initialization needs a point set")
        mask = points.rasterize()
        return LabelStack.from_foreground_masks([mask]).values
    raise ValidationError(f"unknown task {task!r}")


def outer_solve(objective: Objective, params: OuterParams, admm: AdmmParams,
                u0, progress=None) -> SolveState:
    """Outer relinearization loop.

    Each outer iteration: compute the update belt at the current stack,
    pick the scheduled radii, linearize the convexity constraint, add the
    linearized boundary-length gradient to g, run the inner solver for
    `inner_budget` iterations from (u, 0, 0), and adopt the result.
    Terminates when the relative change over `check_stride` outer
    iterations drops below eps, or at max_outer with hit_cap set.

    `progress` is called as progress(record, u) after every outer
    iteration; returning False cancels the solve cooperatively.
    """
    u = np.array(u0, dtype=np.float64, copy=True)
    C, H, W = u.shape
    pins = objective.pins if objective.pins is not None else Pins.empty((C, H, W))
    lam = params.lam
    sigma_scale = params.sigma_scale if params.sigma_scale else max(H, W)
    gauss = make_gaussian_kernel(params.sigma, sigma_scale) if lam > 0 else None
    belt_kernel = make_disc_kernel(params.belt_radius)
    kernel_cache = {}
    inner_params = replace(admm, max_iter=params.inner_budget)

    history = []
    checkpoint = u.copy()
    t0 = time.perf_counter()
    converged = canceled = False
    inner = None
    alpha_cache = {"radii": None, "value": None}
    warm_v = warm_z = None
    last_radii = None
    # Stability during one radii phase says nothing about constraints the
    # other phases probe, so termination requires the relative change to
    # stay below eps for checks spanning a full schedule cycle.
    stops_needed = params.schedule_phases() * max(1, 100 // params.check_stride)
    small_errs = 0

    for k in range(params.max_outer):
        radii = list(params.radii_override) if params.radii_override else radii_schedule(k, params.schedule)
        kernels = []
        for r in radii:
            if r not in kernel_cache:
                kernel_cache[r] = make_disc_kernel(r)
            kernels.append(kernel_cache[r])

        belt = narrow_belt(u, belt_kernel, params.theta, literal=params.belt_literal)
        lin = linearize(u, kernels)
        gp = objective.g if gauss is None else objective.g + length_linear_term(u, gauss, lam)

        # The safe alpha needs a power iteration per linearization, which
        # would triple the outer cost; the operator norm drifts slowly with
        # u and changes mainly when the radii set does, so refresh it on
        # radii changes with an extra margin.
        if admm.alpha == "safe":
            if alpha_cache["radii"] != tuple(radii):
                alpha_cache["value"] = 1.05 * inner_params.resolve_alpha(lin)
                alpha_cache["radii"] = tuple(radii)
            alpha = alpha_cache["value"]
        else:
            alpha = inner_params.resolve_alpha(lin)

        if not params.warm_duals or last_radii != tuple(radii):
            warm_v = warm_z = None
            last_radii = tuple(radii)
        inner = admm_solve(lin, gp, inner_params, pins, belt, u,
                           v0=warm_v, z0=warm_z, alpha=alpha)
        u = inner.u
        if params.warm_duals:
            warm_v, warm_z = inner.v, inner.z

        err = None
        done = False
        if (k + 1) % params.check_stride == 0:
            err = relative_change(u, checkpoint)
            checkpoint = u.copy()
            small_errs = small_errs + 1 if err < params.eps else 0
            done = small_errs >= stops_needed

        record = OuterRecord(
            k=k,
            objective=objective_value(u, objective.g, lam, gauss),
            violations=violation_count(u, kernels),
            belt_px=int(belt.sum()),
            err=err,
            elapsed=time.perf_counter() - t0,
        )
        history.append(record)
        if progress is not None and progress(record, u) is False:
            canceled = True
            break
        if done:
            converged = True
            break

    return SolveState(
        u=u,
        v=inner.v if inner is not None else None,
        z=inner.z if inner is not None else None,
        k=len(history),
        history=history,
        converged=converged,
        hit_cap=not converged and not canceled and len(history) >= params.max_outer,
        canceled=canceled,
    )
