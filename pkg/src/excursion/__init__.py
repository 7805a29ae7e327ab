"""Exact continued-fraction ladders, lattice excursion profiles, and
Hausdorff-dimension bound machinery for divergent diagonal-flow trajectories."""

from .cf import (
    ConvergentLadder,
    PartialQuotientStream,
    PrimitiveVector,
    RealHandle,
    canonical_expand,
    enumerate_successors,
    is_best_approx,
    jb_ladder,
    ladder_from_stream,
    reach_rel,
    succ_rel,
)
from .counting import (
    RationalInterval,
    count_floor_ratio,
    count_heights_in_band,
    min_height_in_interval,
)
from .lattice import (
    DivergenceReport,
    LatticeSlice,
    MinimumEvent,
    TentFunction,
    divergence_certificate,
    local_minima,
    shortest_sup,
    tent_from_ladder,
    tent_of,
    verify_pl,
    w_lattice,
)
from .cantor import (
    CantorLevel,
    DimensionEstimate,
    build_levels,
    build_levels_auto,
    combine_dimensions,
    lower_dim_estimate,
    verify_levels,
)
from .cover import (
    CoverNode2,
    CoverNodeN,
    cover_sum_audit,
    fiberN_audit,
    node2_in_J,
    nodeN_in_J,
    sigma2_enumerate,
    sigmaN_member,
    upper_dim2,
    upper_dimN,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
