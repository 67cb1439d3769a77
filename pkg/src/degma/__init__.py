"""degma: classical solutions of det D^2 f = h f^p with a free boundary, in 2D.

Library layout:

* :mod:`degma.grid_domain` -- convex domains, masked grids, discrete calculus
* :mod:`degma.transforms` -- pressure transform, singular metric, hodograph patches
* :mod:`degma.radial_oracle` -- 1D radial ground truth
* :mod:`degma.ma_solver` -- the 2D degenerate solver and interface extraction
* :mod:`degma.continuation` -- supersolution and the method of continuity
* :mod:`degma.diagnostics` -- a-priori estimate quantities and identity checks
* :mod:`degma.cli` -- batch front door
"""

from .grid_domain import (
    BOUNDARY,
    EXTERIOR,
    INTERIOR,
    BoundaryData,
    ConvexDomain,
    ScalarField2D,
    directional_second,
    gradient,
    hessian,
    level_frame,
    make_grid,
)
from .radial_oracle import (
    RadialSolution,
    leading_coefficient,
    radial_pressure,
    radial_to_field,
    series_correction,
    solve_radial,
)
from .transforms import (
    ExponentPack,
    HodographPatch,
    build_hodograph_patch,
    density_from_pressure,
    dilate_patch,
    hodograph_residual,
    holder_seminorm_s,
    patch_from_callable,
    patch_holder_seminorms,
    pressure_from_density,
    singular_distance,
)

__version__ = "0.1.0"
