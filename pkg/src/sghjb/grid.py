"""Hierarchical sparse-grid point sets on the unit cube.

A grid point is addressed by a multi-level ``l = (l_1, ..., l_d)`` and a
multi-index ``i = (i_1, ..., i_d)`` and sits at ``x_{l,i} = (2^{-l_j} i_j)_j``.
Interior points have ``l_j >= 1`` and odd ``1 <= i_j <= 2^{l_j} - 1``
(membership in the hierarchical index set ``B_l``).  In exact-boundary mode
the two endpoints of each axis are carried as level-0 nodes with index 0 or 1,
so a single ``(level, index)`` key scheme covers both boundary treatments.

The regular sparse space of level ``n`` collects the hierarchical subspaces
``W_l`` with ``|l|_1 <= n + d - 1``.  Boundary nodes are admitted wherever the
same combination with level 0 bumped to level 1 is admitted, which reproduces
the classical "6401 interior points for d=8, n=5" count.

Grids are father-closed: the direct 1D father of every node in every
dimension is present, and (exact mode) every node with ``l_k = 1`` has its two
level-0 partners along dimension ``k``.  All mutation preserves this closure.

Reads are safe under concurrent readers; mutation is single-writer.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass

import numpy as np

__all__ = [
    "HierarchicalNode",
    "AdaptiveSparseGrid",
    "Relative",
    "make_regular_grid",
    "make_full_grid",
    "node_coordinate",
    "hierarchical_relatives",
    "nodal_cell",
    "save_grid_binary",
    "load_grid_binary",
    "save_grid_text",
    "load_grid_text",
]

EXACT = "exact"
MODIFIED = "modified"

Key = tuple[tuple[int, ...], tuple[int, ...]]


@dataclass
class HierarchicalNode:
    """One sparse-grid point: multi-level, multi-index, surplus and nodal value."""

    level: tuple[int, ...]
    index: tuple[int, ...]
    surplus: float = 0.0
    nodal_value: float = 0.0

    @property
    def key(self) -> Key:
        return (self.level, self.index)

    @property
    def coordinate(self) -> tuple[float, ...]:
        return tuple(i * 2.0 ** -max(l, 1) if l > 0 else float(i)
                     for l, i in zip(self.level, self.index))


def _validate_component(l: int, i: int, boundary_mode: str) -> None:
    if l == 0:
        if boundary_mode != EXACT:
            raise ValueError("level-0 components only exist in exact-boundary mode")
        if i not in (0, 1):
            raise ValueError(f"level-0 index must be 0 or 1, got {i}")
    elif l >= 1:
        if not (1 <= i <= 2**l - 1) or i % 2 == 0:
            raise ValueError(f"index {i} not in B_l at level {l}")
    else:
        raise ValueError(f"negative level {l}")


def father_component(l: int, i: int) -> tuple[int, int] | None:
    """Direct 1D father of (l, i); None for level <= 1 components."""
    if l <= 1:
        return None
    half = i >> 1
    return (l - 1, half if half % 2 == 1 else half + 1)


def ancestor_component(l: int, i: int, lp: int) -> tuple[int, int]:
    """The level-``lp`` ancestor of 1D component (l, i), with 1 <= lp < l."""
    c = i >> (l - lp)
    return (lp, c | 1)


class AdaptiveSparseGrid:
    """Keyed collection of hierarchical nodes with tree navigation.

    Nodes are addressed by the pair ``(level, index)`` of integer tuples.
    The container enforces father-closure on insertion order only loosely:
    callers inserting out of order should use :meth:`insert_with_ancestors`.
    """

    def __init__(self, dimension: int, boundary_mode: str = MODIFIED,
                 order: int = 1, max_level: int = 0):
        if dimension < 1:
            raise ValueError(f"dimension must be >= 1, got {dimension}")
        if boundary_mode not in (EXACT, MODIFIED):
            raise ValueError(f"unknown boundary mode {boundary_mode!r}")
        if order not in (1, 2, 3):
            raise ValueError(f"basis order must be 1, 2 or 3, got {order}")
        self.dimension = dimension
        self.boundary_mode = boundary_mode
        self.order = order
        self.max_level = max_level
        self._nodes: dict[Key, HierarchicalNode] = {}
        self._version = 0
        self._data_version = 0
        self._sorted_keys: list[Key] | None = None
        self._key_rows: dict[Key, int] | None = None

    # -- basic container protocol ------------------------------------------

    def __len__(self) -> int:
        return len(self._nodes)

    def __contains__(self, key: Key) -> bool:
        return key in self._nodes

    def __iter__(self):
        return iter(self.sorted_keys())

    def node(self, key: Key) -> HierarchicalNode:
        return self._nodes[key]

    def get(self, key: Key):
        return self._nodes.get(key)

    def _touch(self) -> None:
        self._version += 1
        self._data_version += 1
        self._sorted_keys = None
        self._key_rows = None

    def touch_data(self) -> None:
        """Mark nodal values/surpluses as changed without a structure change."""
        self._data_version += 1

    @property
    def version(self) -> int:
        return self._version

    @property
    def data_version(self) -> int:
        return self._data_version

    def sorted_keys(self) -> list[Key]:
        """Canonical node order: lexicographic in (level, index)."""
        if self._sorted_keys is None:
            self._sorted_keys = sorted(self._nodes.keys())
            self._key_rows = {k: r for r, k in enumerate(self._sorted_keys)}
        return self._sorted_keys

    def key_rows(self) -> dict[Key, int]:
        self.sorted_keys()
        return self._key_rows

    # -- mutation -----------------------------------------------------------

    def insert(self, level, index, nodal_value: float = 0.0,
               surplus: float = 0.0) -> HierarchicalNode:
        level = tuple(int(l) for l in level)
        index = tuple(int(i) for i in index)
        if len(level) != self.dimension or len(index) != self.dimension:
            raise ValueError("level/index length must equal the grid dimension")
        for l, i in zip(level, index):
            _validate_component(l, i, self.boundary_mode)
        key = (level, index)
        node = self._nodes.get(key)
        if node is None:
            node = HierarchicalNode(level, index, surplus, nodal_value)
            self._nodes[key] = node
            self._touch()
        return node

    def insert_with_ancestors(self, level, index) -> list[Key]:
        """Insert a node plus every missing ancestor; returns new keys."""
        added: list[Key] = []
        stack = [(tuple(int(l) for l in level), tuple(int(i) for i in index))]
        while stack:
            key = stack.pop()
            if key in self._nodes:
                continue
            self.insert(key[0], key[1])
            added.append(key)
            for k in range(self.dimension):
                for fk in self.father_keys(key, k):
                    if fk not in self._nodes:
                        stack.append(fk)
        return added

    def remove(self, key: Key) -> None:
        del self._nodes[key]
        self._touch()

    # -- tree navigation ----------------------------------------------------

    def father_keys(self, key: Key, dim: int) -> list[Key]:
        """Keys the closure requires above ``key`` along ``dim``.

        For l_k >= 2 the single direct father; for l_k == 1 in exact mode the
        two level-0 partners; nothing otherwise.
        """
        level, index = key
        l, i = level[dim], index[dim]
        if l >= 2:
            fl, fi = father_component(l, i)
            return [(level[:dim] + (fl,) + level[dim + 1:],
                     index[:dim] + (fi,) + index[dim + 1:])]
        if l == 1 and self.boundary_mode == EXACT:
            lv = level[:dim] + (0,) + level[dim + 1:]
            return [(lv, index[:dim] + (b,) + index[dim + 1:]) for b in (0, 1)]
        return []

    def child_keys(self, key: Key, dim: int) -> list[Key]:
        level, index = key
        l, i = level[dim], index[dim]
        if l < 1:
            return []
        lv = level[:dim] + (l + 1,) + level[dim + 1:]
        return [(lv, index[:dim] + (2 * i - 1,) + index[dim + 1:]),
                (lv, index[:dim] + (2 * i + 1,) + index[dim + 1:])]

    def is_leaf(self, key: Key) -> bool:
        return not any(ck in self._nodes
                       for k in range(self.dimension)
                       for ck in self.child_keys(key, k))

    def is_boundary(self, key: Key) -> bool:
        return any(l == 0 for l in key[0])

    # -- value/surplus arrays in canonical order -----------------------------

    def values_array(self) -> np.ndarray:
        return np.array([self._nodes[k].nodal_value for k in self.sorted_keys()])

    def surplus_array(self) -> np.ndarray:
        return np.array([self._nodes[k].surplus for k in self.sorted_keys()])

    def set_values(self, values) -> None:
        for k, v in zip(self.sorted_keys(), values):
            self._nodes[k].nodal_value = float(v)
        self._data_version += 1

    def set_surpluses(self, surpluses) -> None:
        for k, s in zip(self.sorted_keys(), surpluses):
            self._nodes[k].surplus = float(s)
        self._data_version += 1

    def coordinates_array(self) -> np.ndarray:
        keys = self.sorted_keys()
        out = np.empty((len(keys), self.dimension))
        for r, (lv, ix) in enumerate(keys):
            for j in range(self.dimension):
                l, i = lv[j], ix[j]
                out[r, j] = i * 2.0 ** -l if l > 0 else float(i)
        return out

    def interior_diagonal(self) -> int:
        """Largest |l|_1 over interior nodes (levels clamped up to 1)."""
        best = self.dimension
        for lv, _ in self._nodes:
            s = sum(max(l, 1) for l in lv)
            if s > best:
                best = s
        return best

    def copy(self) -> "AdaptiveSparseGrid":
        g = AdaptiveSparseGrid(self.dimension, self.boundary_mode, self.order,
                               self.max_level)
        g._nodes = {k: HierarchicalNode(n.level, n.index, n.surplus, n.nodal_value)
                    for k, n in self._nodes.items()}
        return g

    # -- structural checks (used heavily by the tests) ----------------------

    def check_invariants(self) -> None:
        for key in self._nodes:
            level, index = key
            for l, i in zip(level, index):
                _validate_component(l, i, self.boundary_mode)
            for k in range(self.dimension):
                for fk in self.father_keys(key, k):
                    if fk not in self._nodes:
                        raise AssertionError(
                            f"father-closure violated: {key} misses {fk}")


@dataclass(frozen=True)
class Relative:
    """A 1D relative of a node: its key when stored, else a bare coordinate."""

    level: int | None
    index: int | None
    coord: float
    stored: bool


def _relative(grid: AdaptiveSparseGrid, key_level, key_index, dim: int,
              l: int, i: int) -> Relative:
    x = i * 2.0 ** -l if l > 0 else float(i)
    if l == 0 and grid.boundary_mode != EXACT:
        return Relative(None, None, x, False)
    lv = key_level[:dim] + (l,) + key_level[dim + 1:]
    ix = key_index[:dim] + (i,) + key_index[dim + 1:]
    return Relative(l, i, x, (lv, ix) in grid)


def _reduce_component(l: int, i: int) -> tuple[int, int]:
    # strip factors of two: (l, even i) names the same point as a coarser node
    while l > 0 and i % 2 == 0:
        l -= 1
        i >>= 1
    return l, i


def hierarchical_relatives(grid: AdaptiveSparseGrid, key: Key, dim: int):
    """Father and 1D support relatives of a node along one dimension.

    Returns a dict with the direct father ``df`` (None at the roots), the west
    and east support endpoints ``w``/``e``, and the extended point ``ee``
    obtained by reflecting the far endpoint across the father.  Relatives that
    are not stored come back as coordinate-only virtual nodes.
    """
    if not 0 <= dim < grid.dimension:
        raise ValueError(f"dim {dim} out of range for dimension {grid.dimension}")
    if key not in grid:
        raise KeyError(f"node {key} not in grid")
    level, index = key
    l, i = level[dim], index[dim]
    if l == 0:
        return {"df": None, "w": None, "e": None, "ee": None}

    wl, wi = _reduce_component(l, i - 1)
    el, ei = _reduce_component(l, i + 1)
    west = _relative(grid, level, index, dim, wl, wi)
    east = _relative(grid, level, index, dim, el, ei)

    fc = father_component(l, i)
    if fc is None:
        father = None
        ee = None
    else:
        father = _relative(grid, level, index, dim, *fc)
        # reflection of the non-father endpoint about the father
        other = west if father.coord == east.coord else east
        ee_coord = 2.0 * father.coord - other.coord
        eel, eei = _reduce_component(l, int(round(ee_coord * 2**l)))
        ee = _relative(grid, level, index, dim, eel, eei)
    return {"df": father, "w": west, "e": east, "ee": ee}


def node_coordinate(node) -> np.ndarray:
    """Coordinate ``x_{l,i} = 2^{-l} i`` of a node (level-0 maps to 0/1)."""
    if isinstance(node, HierarchicalNode):
        level, index = node.level, node.index
    else:
        level, index = node
    return np.array([i * 2.0 ** -l if l > 0 else float(i)
                     for l, i in zip(level, index)])


# -- regular construction ----------------------------------------------------

def _interior_levels(d: int, budget: int):
    """All multi-levels l >= 1 with |l|_1 <= budget, lexicographic order."""
    def rec(prefix, remaining, dims_left):
        if dims_left == 0:
            yield prefix
            return
        for l in range(1, remaining - (dims_left - 1) + 1):
            yield from rec(prefix + (l,), remaining - l, dims_left - 1)
    yield from rec((), budget, d)


def _level_combos(d: int, budget: int, boundary_mode: str):
    """Interior combos plus, in exact mode, variants with levels dropped to 0."""
    for lv in _interior_levels(d, budget):
        yield lv
        if boundary_mode == EXACT:
            ones = [j for j, l in enumerate(lv) if l == 1]
            for mask in range(1, 1 << len(ones)):
                out = list(lv)
                for b, j in enumerate(ones):
                    if mask >> b & 1:
                        out[j] = 0
                yield tuple(out)


def _combo_indices(level: tuple[int, ...]):
    def rec(prefix, j):
        if j == len(level):
            yield prefix
            return
        l = level[j]
        rng = (0, 1) if l == 0 else range(1, 2**l, 2)
        for i in rng:
            yield from rec(prefix + (i,), j + 1)
    yield from rec((), 0)


def make_regular_grid(d: int, n: int, boundary_mode: str = MODIFIED,
                      order: int = 1) -> AdaptiveSparseGrid:
    """Regular sparse grid of level ``n``: subspaces with ``|l|_1 <= n+d-1``.

    Exact mode adds the boundary nodes admitted by the level budget; modified
    mode has no boundary points at all.
    """
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    if n < 1:
        raise ValueError(f"level must be >= 1, got {n}")
    grid = AdaptiveSparseGrid(d, boundary_mode, order, max_level=n)
    for lv in _level_combos(d, n + d - 1, boundary_mode):
        for ix in _combo_indices(lv):
            grid.insert(lv, ix)
    return grid


def make_full_grid(d: int, N: int, boundary_mode: str = MODIFIED,
                   order: int = 1) -> AdaptiveSparseGrid:
    """Full tensor grid: every hierarchical node with ``|l|_inf <= N``."""
    if d < 1 or N < 1:
        raise ValueError("need d >= 1 and N >= 1")
    grid = AdaptiveSparseGrid(d, boundary_mode, order, max_level=N)

    def combos(prefix, j):
        if j == d:
            yield prefix
            return
        low = 0 if boundary_mode == EXACT else 1
        for l in range(low, N + 1):
            yield from combos(prefix + (l,), j + 1)

    for lv in combos((), 0):
        for ix in _combo_indices(lv):
            grid.insert(lv, ix)
    return grid


def interior_count(d: int, n: int) -> int:
    """Closed-form interior node count of the regular grid."""
    from math import comb
    return sum(2**i * comb(d - 1 + i, d - 1) for i in range(n))


# -- nodal cells (truncation support) ----------------------------------------

def _nodal_candidates_1d(l: int, x: float) -> list[int]:
    """Nodal indices at level l whose open support contains x.

    Exactly one when x is itself a level-l grid point (half-open cell
    convention, last cell closed), otherwise the two cell endpoints clipped to
    the interior range 1..2^l-1.
    """
    scaled = x * 2**l
    c = int(scaled)
    if c > 2**l - 1:
        c = 2**l - 1
    if scaled == c and 1 <= c <= 2**l - 1:
        return [c]
    return [i for i in (c, c + 1) if 1 <= i <= 2**l - 1]


def nodal_cell(grid: AdaptiveSparseGrid, x) -> set[Key]:
    """The finest-diagonal nodal points whose basis support contains ``x``.

    Collects, over every interior multi-level on the diagonal
    ``|l|_1 = n + d - 1`` (with ``n`` the grid's current interior level), the
    tensor nodal indices around ``x``.  These pairs may name points that are
    not stored hierarchical nodes; callers value them through the interpolant.
    """
    x = np.asarray(x, dtype=float)
    if np.any(x < 0) or np.any(x > 1):
        raise ValueError(f"point {x} outside the unit cube")
    d = grid.dimension
    diag = grid.interior_diagonal()
    out: set[Key] = set()
    for lv in _interior_levels(d, diag):
        if sum(lv) != diag:
            continue
        per_dim = [_nodal_candidates_1d(lv[j], float(x[j])) for j in range(d)]
        if any(not c for c in per_dim):
            continue

        def rec(prefix, j):
            if j == d:
                out.add((lv, prefix))
                return
            for i in per_dim[j]:
                rec(prefix + (i,), j + 1)
        rec((), 0)
    return out


# -- serialization ------------------------------------------------------------

_MODE_CODE = {EXACT: 0, MODIFIED: 1}
_CODE_MODE = {v: k for k, v in _MODE_CODE.items()}


def save_grid_binary(grid: AdaptiveSparseGrid, path_or_file) -> None:
    """Flat little-endian record stream: header then (level, index, surplus)."""
    own = isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__")
    f = open(path_or_file, "wb") if own else path_or_file
    try:
        keys = grid.sorted_keys()
        f.write(struct.pack("<iiiiq", grid.dimension, _MODE_CODE[grid.boundary_mode],
                            grid.order, grid.max_level, len(keys)))
        d = grid.dimension
        fmt = struct.Struct(f"<{d}i{d}id")
        for lv, ix in keys:
            f.write(fmt.pack(*lv, *ix, grid.node((lv, ix)).surplus))
    finally:
        if own:
            f.close()


def load_grid_binary(path_or_file) -> AdaptiveSparseGrid:
    own = isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__")
    f = open(path_or_file, "rb") if own else path_or_file
    try:
        d, mode, order, max_level, count = struct.unpack("<iiiiq", f.read(24))
        grid = AdaptiveSparseGrid(d, _CODE_MODE[mode], order, max_level)
        fmt = struct.Struct(f"<{d}i{d}id")
        for _ in range(count):
            rec = fmt.unpack(f.read(fmt.size))
            grid.insert(rec[:d], rec[d:2 * d], surplus=rec[2 * d])
        return grid
    finally:
        if own:
            f.close()


def save_grid_text(grid: AdaptiveSparseGrid, path_or_file) -> None:
    """One node per line: levels, indices, then the surplus in full precision."""
    own = isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__")
    f = open(path_or_file, "w") if own else path_or_file
    try:
        f.write(f"{grid.dimension} {_MODE_CODE[grid.boundary_mode]} "
                f"{grid.order} {grid.max_level} {len(grid)}\n")
        for lv, ix in grid.sorted_keys():
            parts = [str(v) for v in lv] + [str(v) for v in ix]
            parts.append(repr(grid.node((lv, ix)).surplus))
            f.write(" ".join(parts) + "\n")
    finally:
        if own:
            f.close()


def load_grid_text(path_or_file) -> AdaptiveSparseGrid:
    own = isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__")
    f = open(path_or_file, "r") if own else path_or_file
    try:
        d, mode, order, max_level, count = (int(v) for v in f.readline().split())
        grid = AdaptiveSparseGrid(d, _CODE_MODE[mode], order, max_level)
        for _ in range(count):
            parts = f.readline().split()
            lv = tuple(int(v) for v in parts[:d])
            ix = tuple(int(v) for v in parts[d:2 * d])
            grid.insert(lv, ix, surplus=float(parts[2 * d]))
        return grid
    finally:
        if own:
            f.close()


def grid_bytes(grid: AdaptiveSparseGrid) -> bytes:
    """Binary image of the grid, handy for bit-identity checks."""
    buf = io.BytesIO()
    save_grid_binary(grid, buf)
    return buf.getvalue()
