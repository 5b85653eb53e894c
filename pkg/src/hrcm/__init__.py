"""Random connection model on hyperbolic space (H^2, H^3)."""

__version__ = "0.1.0"

from .geometry import (  # noqa: F401
    GeometryError,
    HalfSpace,
    HPoint,
    Isometry,
    TriangleSolution,
    avoidance_length,
    ball_measure,
    dist,
    embed_binary_tree,
    from_klein,
    origin,
    pulled_halfspace_params,
    solve_triangle,
    stepping_stones,
    to_klein,
    translation_isometry,
)
from .sampling import (  # noqa: F401
    Configuration,
    ConnectionSpec,
    assign_ghosts,
    connection_prob,
    int_phi,
    sample_configuration,
    sample_edges,
    sample_points,
)
from .clusters import (  # noqa: F401
    ClusterStats,
    cluster_stats,
    components,
    estimate_chi,
    estimate_magnetization,
    estimate_tail,
    estimate_theta,
    two_point,
)
from .hull import cap_fraction, convex_hull, eps_boundary, halo_area, polygon_area  # noqa: F401
from .gregtrees import enumerate_greg, greg_asymptotic, moment_bound_check  # noqa: F401
from .exponents import SweepPlan, estimate_lambda_c, fit_exponent, run_sweep  # noqa: F401
from .render import RenderSpec, render_svg  # noqa: F401
