"""One-dimensional basis families and the surplus transforms.

Three interior families on the support ``[2^{-l}(i-1), 2^{-l}(i+1)]`` share
one dilation pattern ``phi(2^l x - i)``:

* linear hat       ``phi(s) = max(1 - |s|, 0)``
* quadratic        ``phi(s) = 1 - s^2``
* cubic, two kinds ``phi_1(s) = (s^2-1)(s-3)/3`` (father to the east,
  node index 1 mod 4) and ``phi_2(s) = (1-s^2)(s+3)/3`` (mirror, 3 mod 4).

Exact-boundary grids add the two linear functions ``1-x`` and ``x`` at level
0; a cubic at level 1 is not available, so the quadratic bump is used there.
Modified-boundary grids carry no boundary points: level 1 is the constant 1
and the first/last function of every finer level extrapolates linearly toward
the domain edge; quadratic edges reuse those linear edges, cubic additionally
degrades ``i in {3, 2^l-3}`` to the plain quadratic.

Hierarchization turns nodal values into hierarchical surpluses by successive
1D sweeps over the dimensions.  Each 1D sweep subtracts, in ascending level
order, the already-transformed ancestor contributions at the node, which on
exact-boundary grids reproduces the classical recurrences

* ``alpha^L(m) = f(m) - (f(w(m)) + f(e(m)))/2``
* ``alpha^Q(m) = alpha^L(m) - alpha^L(df(m))/4``
* ``alpha^{C1}(m) = alpha^Q(m) - alpha^Q(df(m))/8``  (i mod 8 in {1, 7})
* ``alpha^{C2}(m) = alpha^Q(m) + alpha^Q(df(m))/8``  (i mod 8 in {3, 5})

and stays exact next to modified edges where those recurrences do not apply.
``eval_1d`` is pure; the transforms run single-threaded over the grid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import EXACT, MODIFIED, AdaptiveSparseGrid, ancestor_component

__all__ = [
    "BasisFamily",
    "SurplusKind",
    "eval_1d",
    "hierarchize",
    "dehierarchize",
    "linear_surplus",
    "quadratic_surplus_direct",
    "quadratic_from_linear",
    "cubic_from_quadratic",
    "surplus_kind",
]

_ORDER_NAMES = {1: "linear", 2: "quadratic", 3: "cubic"}


@dataclass(frozen=True)
class BasisFamily:
    """A fixed interpolation order and boundary treatment."""

    order: int = 1
    boundary_mode: str = MODIFIED

    def __post_init__(self):
        if self.order not in (1, 2, 3):
            raise ValueError(f"order must be 1, 2 or 3, got {self.order}")
        if self.boundary_mode not in (EXACT, MODIFIED):
            raise ValueError(f"unknown boundary mode {self.boundary_mode!r}")

    @property
    def name(self) -> str:
        return f"{_ORDER_NAMES[self.order]}-{self.boundary_mode}"

    def validate(self, l: int, i: int) -> None:
        if l == 0:
            if self.boundary_mode != EXACT:
                raise ValueError("boundary functions exist only in exact mode")
            if i not in (0, 1):
                raise ValueError(f"level-0 index must be 0 or 1, got {i}")
            return
        if l < 0 or not (1 <= i <= 2**l - 1) or i % 2 == 0:
            raise ValueError(f"({l}, {i}) is not a valid hierarchical function")

    # scalar evaluation; the hot loops inline the same arithmetic
    def value(self, l: int, i: int, x: float) -> float:
        if l == 0:
            return 1.0 - x if i == 0 else x
        if self.boundary_mode == MODIFIED:
            if l == 1:
                return 1.0
            if i == 1:
                s = 2.0 - x * 2**l
                return s if s >= 0.0 and x >= 0.0 and s <= 2.0 else 0.0
            if i == 2**l - 1:
                s = x * 2**l - (2**l - 2)
                return s if 0.0 <= s <= 2.0 and x <= 1.0 else 0.0
            if self.order == 3 and i in (3, 2**l - 3):
                s = x * 2**l - i
                return 1.0 - s * s if abs(s) <= 1.0 else 0.0
        s = x * 2**l - i
        if abs(s) > 1.0:
            return 0.0
        if self.order == 1:
            return 1.0 - abs(s)
        if self.order == 2 or l == 1:
            return 1.0 - s * s
        if i % 4 == 1:
            return (s * s - 1.0) * (s - 3.0) / 3.0
        return (1.0 - s * s) * (s + 3.0) / 3.0

    def values(self, l: int, i, x) -> np.ndarray:
        """Vectorized :meth:`value` for one level, arrays of indices/points."""
        i = np.asarray(i)
        x = np.asarray(x, dtype=float)
        if l == 0:
            return np.where(i == 0, 1.0 - x, x)
        two_l = float(2**l)
        s = x * two_l - i
        inside = np.abs(s) <= 1.0
        if self.order == 1 or l == 1:
            if self.order == 1:
                out = np.where(inside, 1.0 - np.abs(s), 0.0)
            else:
                out = np.where(inside, 1.0 - s * s, 0.0)
        elif self.order == 2:
            out = np.where(inside, 1.0 - s * s, 0.0)
        else:
            c1 = (s * s - 1.0) * (s - 3.0) / 3.0
            c2 = (1.0 - s * s) * (s + 3.0) / 3.0
            out = np.where(inside, np.where(i % 4 == 1, c1, c2), 0.0)
            if self.boundary_mode == MODIFIED and l >= 2:
                quad = np.where(inside, 1.0 - s * s, 0.0)
                out = np.where((i == 3) | (i == 2**l - 3), quad, out)
        if self.boundary_mode == MODIFIED:
            if l == 1:
                return np.ones_like(x)
            left = np.clip(2.0 - x * two_l, 0.0, 2.0)
            right = np.clip(x * two_l - (two_l - 2.0), 0.0, 2.0)
            out = np.where(i == 1, left, out)
            out = np.where(i == 2**l - 1, right, out)
        return out

    def support(self, l: int, i: int) -> tuple[float, float]:
        if l == 0 or (self.boundary_mode == MODIFIED and l == 1):
            return (0.0, 1.0)
        if self.boundary_mode == MODIFIED and i == 1:
            return (0.0, 2.0 ** (-l + 1))
        if self.boundary_mode == MODIFIED and i == 2**l - 1:
            return (1.0 - 2.0 ** (-l + 1), 1.0)
        return ((i - 1) * 2.0**-l, (i + 1) * 2.0**-l)


def family_for(grid: AdaptiveSparseGrid) -> BasisFamily:
    return BasisFamily(grid.order, grid.boundary_mode)


def eval_1d(family: BasisFamily, l: int, i: int, x: float) -> float:
    """Value of the 1D basis function (l, i) at x in [0, 1]."""
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"x={x} outside [0, 1]")
    family.validate(l, i)
    return family.value(l, i, x)


@dataclass(frozen=True)
class SurplusKind:
    """Which recurrence produced a coefficient (diagnostic bookkeeping)."""

    tag: str  # one of L, Q, C1, C2


def surplus_kind(order: int, l: int, i: int) -> SurplusKind:
    if order == 1 or l == 0:
        return SurplusKind("L")
    if order == 2 or l <= 2:
        return SurplusKind("Q")
    return SurplusKind("C1" if i % 8 in (1, 7) else "C2")


# -- classical recurrences (exact-boundary identities, used as test oracles) --

def linear_surplus(f_m: float, f_w: float, f_e: float) -> float:
    return f_m - 0.5 * (f_w + f_e)


def quadratic_surplus_direct(f_m, f_w, f_e, f_ee, father_east: bool) -> float:
    """f(m) minus the quadratic through the coarser nodes, both orientations."""
    if father_east:
        return f_m - (0.375 * f_w + 0.75 * f_e - 0.125 * f_ee)
    return f_m - (0.375 * f_e + 0.75 * f_w - 0.125 * f_ee)


def quadratic_from_linear(a_l_m: float, a_l_df: float) -> float:
    return a_l_m - 0.25 * a_l_df


def cubic_from_quadratic(a_q_m: float, a_q_df: float, i: int) -> float:
    if i % 8 in (1, 7):
        return a_q_m - 0.125 * a_q_df
    return a_q_m + 0.125 * a_q_df


# -- the d-dimensional transforms ---------------------------------------------

def _pole_groups(grid: AdaptiveSparseGrid, dim: int):
    """Rows of the canonical order grouped by all components except ``dim``."""
    groups: dict[tuple, list[tuple[int, int, int]]] = {}
    for row, (lv, ix) in enumerate(grid.sorted_keys()):
        pole = (lv[:dim] + lv[dim + 1:], ix[:dim] + ix[dim + 1:])
        groups.setdefault(pole, []).append((lv[dim], ix[dim], row))
    for members in groups.values():
        members.sort()
    return groups


def _sweep(grid, family, work, dim, forward):
    """One 1D pass along ``dim``: nodal->surplus (forward) or back."""
    exact = family.boundary_mode == EXACT
    value = family.value
    for members in _pole_groups(grid, dim).values():
        rows = {(l, i): r for l, i, r in members}
        seq = members if forward else reversed(members)
        for l, i, row in seq:
            if l == 0:
                continue
            x = i * 2.0**-l
            acc = 0.0
            for lp in range(l - 1, 0, -1):
                comp = ancestor_component(l, i, lp)
                acc += work[rows[comp]] * value(comp[0], comp[1], x)
            if exact:
                acc += work[rows[(0, 0)]] * (1.0 - x) + work[rows[(0, 1)]] * x
            work[row] = work[row] - acc if forward else work[row] + acc


def hierarchize(grid: AdaptiveSparseGrid, values=None,
                family: BasisFamily | None = None) -> np.ndarray:
    """Nodal values -> surpluses for the grid's family, stored and returned.

    ``values`` (canonical order) defaults to the stored nodal values.  Every
    required father is present by the grid's closure invariant, so no virtual
    relatives are ever needed.
    """
    family = family or family_for(grid)
    if values is None:
        work = grid.values_array()
    else:
        work = np.array(values, dtype=float)
        if work.shape != (len(grid),):
            raise ValueError("values must have one entry per node")
        grid.set_values(work)
    work = work.copy()
    for dim in range(grid.dimension):
        _sweep(grid, family, work, dim, forward=True)
    grid.set_surpluses(work)
    return work


def dehierarchize(grid: AdaptiveSparseGrid, surpluses=None,
                  family: BasisFamily | None = None) -> np.ndarray:
    """Exact inverse of :func:`hierarchize` up to round-off."""
    family = family or family_for(grid)
    if surpluses is None:
        work = grid.surplus_array()
    else:
        work = np.array(surpluses, dtype=float)
        if work.shape != (len(grid),):
            raise ValueError("surpluses must have one entry per node")
        grid.set_surpluses(work)
    work = work.copy()
    for dim in range(grid.dimension - 1, -1, -1):
        _sweep(grid, family, work, dim, forward=False)
    grid.set_values(work)
    return work
