"""Adaptive sparse grids and a semi-Lagrangian solver for diffusion HJB equations."""

from .grid import (
    AdaptiveSparseGrid,
    HierarchicalNode,
    make_regular_grid,
    make_full_grid,
    node_coordinate,
    hierarchical_relatives,
    nodal_cell,
)
from .basis import BasisFamily, eval_1d, hierarchize, dehierarchize
from .interp import (
    Interpolant,
    evaluate,
    evaluate_batch,
    evaluate_truncated,
    evaluate_envelope,
)

__all__ = [
    "AdaptiveSparseGrid",
    "HierarchicalNode",
    "BasisFamily",
    "Interpolant",
    "make_regular_grid",
    "make_full_grid",
    "node_coordinate",
    "hierarchical_relatives",
    "nodal_cell",
    "eval_1d",
    "hierarchize",
    "dehierarchize",
    "evaluate",
    "evaluate_batch",
    "evaluate_truncated",
    "evaluate_envelope",
]

__version__ = "0.1.0"
