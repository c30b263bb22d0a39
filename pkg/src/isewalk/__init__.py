"""Skeletons, tree diffusions and random-walk scaling on critical random graphs."""
__version__ = "0.1.0"

from .graph import (
    RootedGraph,
    CutDecomposition,
    HittingMoments,
    ResistanceSolver,
    find_cut_decomposition,
    effective_resistance,
    triangle_arm_conductances,
    hitting_time_moments,
    verify_variance_bound,
    verify_fourth_moment_bound,
    read_edge_list,
    write_edge_list,
)

from . import conditions, continuum, models, parallel, skeleton, treebm, trees, walks  # noqa: E402
