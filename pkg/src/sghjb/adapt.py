"""Surplus-driven mesh adaptation: local refinement, coarsening, and the
greedy dimension-wise enrichment used on the first time step.

A refinement pass visits the leaves of the multidimensional tree.  Every leaf
whose surplus magnitude exceeds the precision, and whose coordinate lies in
the refinement box, receives its two hierarchical sons per dimension (levels
capped at ``max_level``); missing fathers are then completed so the structure
has no holes.  Coarsening deletes leaves whose surplus magnitude is below
``coarsen_factor`` times the precision, repeatedly, never touching boundary
nodes, level-1 roots, or the protected initial budget.

Dimension adaptation grows a downward-closed set of level multi-indices: a
candidate subspace is admissible once all its backward neighbors are active,
and candidates are accepted greedily by the sum of surplus magnitudes over
their nodes until the largest indicator drops to the precision.

Adaptation itself is single-threaded; only the valuation of freshly inserted
points may be batched.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basis import BasisFamily, family_for, hierarchize
from .grid import EXACT, AdaptiveSparseGrid, node_coordinate
from .interp import Interpolant

__all__ = ["AdaptPolicy", "AdaptReport", "refine_pass", "coarsen",
           "dimension_adapt_initial"]


@dataclass
class AdaptPolicy:
    """Knobs of the adaptation loop.

    ``refine_box`` is an axis-aligned box in the unit cube as (lo, hi) arrays;
    None allows refinement everywhere.  ``protect_budget`` is the level-sum
    budget of the initial regular grid (n0 + d - 1); coarsening never removes
    nodes inside it.
    """

    precision: float
    max_level: int
    coarsen_factor: float = 10.0
    refine_box: tuple | None = None
    protect_budget: int | None = None

    def __post_init__(self):
        if self.precision < 0:
            raise ValueError("precision must be >= 0")
        if self.max_level < 1:
            raise ValueError("max_level must be >= 1")
        if self.refine_box is not None:
            lo, hi = (np.asarray(a, dtype=float) for a in self.refine_box)
            if np.any(lo < 0) or np.any(hi > 1) or np.any(lo > hi):
                raise ValueError("refine_box must be inside the unit cube")
            self.refine_box = (lo, hi)

    def in_box(self, x) -> bool:
        if self.refine_box is None:
            return True
        lo, hi = self.refine_box
        return bool(np.all(x >= lo) and np.all(x <= hi))


@dataclass
class AdaptReport:
    nodes_added: int = 0
    nodes_removed: int = 0
    max_leaf_surplus: float = 0.0
    passes: int = 0


def _leaf_keys(grid: AdaptiveSparseGrid):
    return [k for k in grid.sorted_keys() if grid.is_leaf(k)]


def refine_pass(grid: AdaptiveSparseGrid, policy: AdaptPolicy,
                family: BasisFamily | None = None,
                new_value_fn=None) -> AdaptReport:
    """One refinement sweep over the leaves; surpluses must be current.

    ``new_value_fn(points) -> values`` supplies nodal values for inserted
    points; by default they come from the interpolant as it stood before the
    pass.  The grid is re-hierarchized before returning whenever nodes were
    added.
    """
    family = family or family_for(grid)
    if new_value_fn is None:
        # the snapshot copies the surpluses, so it survives the mutation below
        new_value_fn = Interpolant(grid, family).snapshot().eval_batch

    report = AdaptReport(passes=1)
    targets = []
    for key in _leaf_keys(grid):
        s = abs(grid.node(key).surplus)
        report.max_leaf_surplus = max(report.max_leaf_surplus, s)
        if s > policy.precision and policy.in_box(node_coordinate(key)):
            targets.append(key)

    added: list = []
    for key in targets:
        for dim in range(grid.dimension):
            if key[0][dim] < 1 or key[0][dim] + 1 > policy.max_level:
                continue
            for child in grid.child_keys(key, dim):
                if child not in grid:
                    added.extend(grid.insert_with_ancestors(*child))
    report.nodes_added = len(added)
    if added:
        pts = np.array([node_coordinate(k) for k in added])
        vals = np.asarray(new_value_fn(pts), dtype=float)
        for k, v in zip(added, vals):
            grid.node(k).nodal_value = float(v)
        grid.touch_data()
        hierarchize(grid, family=family)
    return report


def coarsen(grid: AdaptiveSparseGrid, policy: AdaptPolicy) -> AdaptReport:
    """Delete low-surplus leaves until none qualifies; surpluses must be
    current.  Remaining surpluses and nodal values are untouched (removing a
    leaf never changes an ancestor chain)."""
    threshold = policy.coarsen_factor * policy.precision
    protect = policy.protect_budget
    report = AdaptReport()
    while True:
        report.passes += 1
        doomed = []
        for key in _leaf_keys(grid):
            if grid.is_boundary(key):
                continue
            if all(l <= 1 for l in key[0]):
                continue
            if protect is not None and sum(max(l, 1) for l in key[0]) <= protect:
                continue
            if abs(grid.node(key).surplus) < threshold:
                doomed.append(key)
        if not doomed:
            break
        for key in doomed:
            grid.remove(key)
        report.nodes_removed += len(doomed)
    return report


def _backward_neighbors(levels):
    for j, l in enumerate(levels):
        if l >= 2:
            yield levels[:j] + (l - 1,) + levels[j + 1:]


def _subspace_keys(grid: AdaptiveSparseGrid, levels):
    """All hierarchical keys of subspace W_l, plus exact-mode boundary combos
    tied to its level-1 components."""
    combos = [levels]
    if grid.boundary_mode == EXACT:
        ones = [j for j, l in enumerate(levels) if l == 1]
        for mask in range(1, 1 << len(ones)):
            out = list(levels)
            for b, j in enumerate(ones):
                if mask >> b & 1:
                    out[j] = 0
            combos.append(tuple(out))
    keys = []
    for lv in combos:
        def rec(prefix, j):
            if j == len(lv):
                keys.append((lv, prefix))
                return
            rng = (0, 1) if lv[j] == 0 else range(1, 2**lv[j], 2)
            for i in rng:
                rec(prefix + (i,), j + 1)
        rec((), 0)
    return keys


def dimension_adapt_initial(grid: AdaptiveSparseGrid, f, policy: AdaptPolicy,
                            family: BasisFamily | None = None) -> AdaptReport:
    """Greedy subspace enrichment of a fresh regular grid against ``f``.

    ``f(points) -> values`` is evaluated at the unit-cube coordinates of new
    nodes.  All nodal values are (re)set from ``f`` first, so the indicators
    measure the function actually supplied.
    """
    family = family or family_for(grid)
    report = AdaptReport()

    grid.set_values(f(grid.coordinates_array()))
    hierarchize(grid, family=family)

    active = {lv for lv, _ in grid.sorted_keys() if all(l >= 1 for l in lv)}
    tentative: dict[tuple, list] = {}

    def indicator(levels) -> float:
        return sum(abs(grid.node(k).surplus) for k in tentative[levels]
                   if all(l >= 1 for l in k[0]))

    while True:
        frontier = set()
        for lv in active:
            for j in range(grid.dimension):
                cand = lv[:j] + (lv[j] + 1,) + lv[j + 1:]
                if cand in active or cand in tentative:
                    continue
                if max(cand) > policy.max_level:
                    continue
                if all(b in active for b in _backward_neighbors(cand)):
                    frontier.add(cand)
        new_nodes = []
        for cand in sorted(frontier):
            keys = _subspace_keys(grid, cand)
            fresh = [k for k in keys if k not in grid]
            for k in fresh:
                grid.insert(*k)
            new_nodes.extend(fresh)
            tentative[cand] = keys
        if new_nodes:
            pts = np.array([node_coordinate(k) for k in new_nodes])
            vals = np.asarray(f(pts), dtype=float)
            for k, v in zip(new_nodes, vals):
                grid.node(k).nodal_value = float(v)
            grid.touch_data()
            hierarchize(grid, family=family)
        if not tentative:
            break
        best = max(sorted(tentative), key=indicator)
        best_ind = indicator(best)
        report.max_leaf_surplus = max(report.max_leaf_surplus, best_ind)
        if best_ind <= policy.precision:
            break
        active.add(best)
        report.nodes_added += len(tentative.pop(best))
        report.passes += 1

    # drop evaluated-but-rejected subspaces, keeping boundary combos that the
    # accepted set still needs
    removed = 0
    for cand, keys in tentative.items():
        for k in keys:
            if k in grid and all(l >= 1 for l in k[0]):
                grid.remove(k)
                removed += 1
    if grid.boundary_mode == EXACT:
        for key in list(grid.sorted_keys()):
            lv = key[0]
            if 0 in lv:
                lifted = tuple(max(l, 1) for l in lv)
                if lifted not in active:
                    grid.remove(key)
                    removed += 1
    report.nodes_removed = removed
    if removed:
        hierarchize(grid, family=family)
    grid.check_invariants()
    return report
