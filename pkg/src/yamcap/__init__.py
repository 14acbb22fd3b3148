"""yamcap: Bessel-type capacity, boundary blow-up solves of the conformal
scalar-curvature equation, dyadic Wiener tests and conformal completeness
probes on desk-scale grids."""

__version__ = "0.1.0"

from .exponents import Exponents
from .geometry import (
    Ball,
    Box,
    CompactSetSpec,
    Cusp,
    CuspProfile,
    Point,
    SceneError,
    SegmentTube,
    SubmanifoldTube,
    Union,
    load_scene,
    rasterize,
    signed_distance,
)
from .grids import GridSpec, ScalarField
from .capacity import (
    CapacityResult,
    CapacitySolveConfig,
    CutoffPair,
    build_cutoff,
    calibrated_capacity,
    capacity_on_sphere,
    closed_form_capacity,
    cutoff_integral_checks,
    estimate_capacity,
)
from .content import HausdorffContentEstimate, hausdorff_content
from .pde import (
    SolutionField,
    SolveConfig,
    maximal_solution,
    rescale_solution,
    solve_dirichlet,
    solve_large,
    verify_integral_estimate,
    verify_pointwise_estimate,
)
from .conformal import SphereSamples, TransferredSolution, pull_to_plane, push_to_sphere
from .wiener import WienerReport, classify_catalog, dyadic_bridge, wiener_terms
from .metriclen import (
    Curve,
    LengthReport,
    RadialProbe,
    build_radial_probe,
    completeness_probe,
    conformal_length,
    shell_lower_bound,
)
from .sphere import SphereCap, SphereSetSpec, conformal_factor, rotate_to_cap, stereo, stereo_inv
