"""Convexity-prior segmentation and convex hull solver.

Enforces shape convexity through a quadratic inequality on relaxed
indicator functions, solved by linearization plus a proximal ADMM inner
loop. Ships a batch CLI (`convexseg`) and an interactive scribble-labeling
HTTP service (`convexseg.service`).
"""

from .fields import (
    Grid2D,
    LabelStack,
    Pins,
    RadialKernel,
    GaussianKernel,
    make_disc_kernel,
    make_gaussian_kernel,
    convolve_scalar,
    convolve_stack,
)
from .convexity import convexity_residual, linearize, narrow_belt, violation_count
from .dataterm import (
    Objective,
    PointSet,
    ScribbleSet,
    assemble_objective,
    class_probabilities,
    objective_value,
    similarity_field,
)
from .geometry import digital_convexity_oracle, quickhull, rasterize, shape_distance
from .optimizer import (
    AdmmParams,
    OuterParams,
    SolveState,
    admm_solve,
    initialize,
    outer_solve,
    project_simplex,
    radii_schedule,
)

__version__ = "0.1.0"
