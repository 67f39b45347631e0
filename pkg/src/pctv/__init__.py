"""Graph total variation on sampled point clouds and its continuum limits.

The package builds geometric graphs over random samples, evaluates
their scaled total variation, perimeter, and minimal bisection, and
compares them against the weighted continuum functionals they
approximate, with transportation metrics tying the discrete and
continuum objects together.
"""

__version__ = "0.1.0"

from .bisection import (
    Bisection,
    agreement,
    bisection_energy,
    brute_force_bisection,
    consistency_sweep,
    local_search_bisection,
)
from .continuum import (
    SmoothFunction,
    affine_function,
    coordinate_function,
    disk_set,
    halfplane_set,
    nonlocal_tv,
    weighted_perimeter,
    weighted_tv_smooth,
)
from .errors import (
    ConfigError,
    DivergentKernelError,
    EnvelopeError,
    InvalidProfileError,
    MarginalError,
    PCTVError,
    UnsupportedConfigurationError,
)
from .geometry import (
    Box,
    BoxUnion,
    ConvexPolygon,
    Density,
    PointCloud,
    affine_density,
    dumbbell,
    grid_points,
    sample_iid,
    uniform_density,
    unit_box,
)
from .graph import (
    WeightedGraph,
    build_graph,
    coarea_decompose,
    coarea_reconstruct,
    component_labels,
    graph_perimeter,
    graph_total_variation,
    is_connected,
)
from .kernels import (
    KernelProfile,
    SurfaceTension,
    effective_support,
    gaussian,
    indicator,
    step_sum,
    surface_tension,
    truncate,
    validate_profile,
)
from .transport import (
    DiscreteMeasure,
    LiftedFunction,
    TransportMap,
    TransportPlan,
    bottleneck_distance,
    ot_distance,
    plan_compose,
    plan_inverse,
    push_forward,
    tlp_distance,
)

__all__ = [
    "__version__",
    "Bisection",
    "Box",
    "BoxUnion",
    "ConfigError",
    "ConvexPolygon",
    "Density",
    "DiscreteMeasure",
    "DivergentKernelError",
    "EnvelopeError",
    "InvalidProfileError",
    "KernelProfile",
    "LiftedFunction",
    "MarginalError",
    "PCTVError",
    "PointCloud",
    "SmoothFunction",
    "SurfaceTension",
    "TransportMap",
    "TransportPlan",
    "UnsupportedConfigurationError",
    "WeightedGraph",
    "affine_density",
    "affine_function",
    "agreement",
    "bisection_energy",
    "bottleneck_distance",
    "brute_force_bisection",
    "build_graph",
    "coarea_decompose",
    "coarea_reconstruct",
    "component_labels",
    "consistency_sweep",
    "coordinate_function",
    "disk_set",
    "dumbbell",
    "effective_support",
    "gaussian",
    "graph_perimeter",
    "graph_total_variation",
    "grid_points",
    "halfplane_set",
    "indicator",
    "is_connected",
    "local_search_bisection",
    "nonlocal_tv",
    "ot_distance",
    "plan_compose",
    "plan_inverse",
    "push_forward",
    "sample_iid",
    "step_sum",
    "surface_tension",
    "tlp_distance",
    "truncate",
    "uniform_density",
    "unit_box",
    "validate_profile",
    "weighted_perimeter",
    "weighted_tv_smooth",
]
