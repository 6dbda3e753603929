"""Compensated convex transforms on uniform grids and singularity extraction."""

import warnings

# numba probes an outdated TBB on some systems and falls back silently otherwise
warnings.filterwarnings("ignore", message="The TBB threading layer")

from .grid import (GridError, GridSpec, LipschitzEstimate, ScalarGrid, estimate_lipschitz,  # noqa: E402
                   pad_for_locality, read_grid, write_grid)
from .envelope import MoreauParams, convex_envelope_1d, moreau  # noqa: E402
from .transforms import (TransformKind, apply_transform, lower_transform, mixed_transform,  # noqa: E402
                         upper_transform)
from .minisphere import Polytope, Sphere, centre_in_hull_check, jung_check, min_bounding_sphere  # noqa: E402
from .oracle import TestFunction, predicted_landscape, sample, subdifferential  # noqa: E402
from .singularity import (SweepReport, dc_edge_bound, gradient_lipschitz_check, gradient_upper,  # noqa: E402
                          landscape_sweep, scale1_map, singular_map)
from .medial import SiteSet, distance_vs_sqdistance_check, medial_axis_map, sq_distance_transform  # noqa: E402

__version__ = "0.1.0"

__all__ = [
    "GridError", "GridSpec", "LipschitzEstimate", "ScalarGrid", "estimate_lipschitz",
    "pad_for_locality", "read_grid", "write_grid",
    "MoreauParams", "convex_envelope_1d", "moreau",
    "TransformKind", "apply_transform", "lower_transform", "mixed_transform", "upper_transform",
    "Polytope", "Sphere", "centre_in_hull_check", "jung_check", "min_bounding_sphere",
    "TestFunction", "predicted_landscape", "sample", "subdifferential",
    "SweepReport", "dc_edge_bound", "gradient_lipschitz_check", "gradient_upper",
    "landscape_sweep", "scale1_map", "singular_map",
    "SiteSet", "distance_vs_sqdistance_check", "medial_axis_map", "sq_distance_transform",
]
