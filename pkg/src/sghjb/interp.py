"""Point evaluation of the sparse interpolant, truncation and envelopes.

The interpolant is the sum of surplus-weighted tensor basis functions over
the stored nodes.  A single point is evaluated by descending the tree from
the root(s): at each node, per dimension, only the son whose support half
contains the point is visited, so the visited chains are exactly the basis
functions that are nonzero at the point.  A batched evaluator walks the
stored level combinations instead and vectorizes over the query points; both
agree with the naive full summation to round-off.

High-order interpolants can overshoot.  The truncated value at ``x`` clamps
the raw value to ``[f_lo(x), f_hi(x)]``, the min/max of the function over the
nodal cell of the finest level-sum diagonal whose supports contain ``x``.
The same bounds double as the lower/upper envelope operators used by the
bounding scheme runs.  All operations here are pure reads of a grid snapshot.
"""

from __future__ import annotations

import numpy as np

from .basis import BasisFamily, family_for
from .grid import EXACT, AdaptiveSparseGrid, _interior_levels, _nodal_candidates_1d

__all__ = [
    "Interpolant",
    "evaluate",
    "naive_evaluate",
    "evaluate_batch",
    "evaluate_truncated",
    "evaluate_envelope",
]

_BATCH_CHUNK = 262144


class _Combo:
    """Snapshot of the nodes of one multi-level: codes, surpluses, radices."""

    __slots__ = ("levels", "radices", "strides", "zero_dims", "codes",
                 "surplus", "dense")

    def __init__(self, levels, rows, surpluses):
        self.levels = levels
        d = len(levels)
        self.radices = [2 if l == 0 else 1 << max(l - 1, 0) for l in levels]
        strides = [1] * d
        for j in range(d - 2, -1, -1):
            strides[j] = strides[j + 1] * self.radices[j + 1]
        self.strides = strides
        self.zero_dims = [j for j, l in enumerate(levels) if l == 0]
        codes = np.empty(len(rows), dtype=np.int64)
        surp = np.empty(len(rows))
        for out_r, (ix, row) in enumerate(rows):
            code = 0
            for j, l in enumerate(levels):
                pos = ix[j] if l == 0 else ix[j] >> 1
                code += pos * strides[j]
            codes[out_r] = code
            surp[out_r] = surpluses[row]
        order = np.argsort(codes, kind="stable")
        self.codes = codes[order]
        self.surplus = surp[order]
        size = int(np.prod(self.radices))
        if len(self.codes) == size:
            self.dense = self.surplus  # codes are then 0..size-1 in order
        else:
            self.dense = None


class _Snapshot:
    """Immutable view of (grid structure, surpluses) for fast evaluation."""

    def __init__(self, grid: AdaptiveSparseGrid, family: BasisFamily):
        self.dimension = grid.dimension
        self.family = family
        self.exact = grid.boundary_mode == EXACT
        surpluses = grid.surplus_array()
        keys = grid.sorted_keys()
        by_level: dict[tuple, list] = {}
        for row, (lv, ix) in enumerate(keys):
            by_level.setdefault(lv, []).append((ix, row))
        self.combos = [_Combo(lv, rows, surpluses)
                       for lv, rows in sorted(by_level.items())]
        self.nodes = {k: surpluses[r] for r, k in enumerate(keys)}
        self.roots = [k for k in keys if all(l <= 1 for l in k[0])]
        self.diagonal = grid.interior_diagonal()
        self._nodal_dense: dict | None = None
        self._values_at_keys = None
        self._grid = grid

    # -- scalar tree descent --------------------------------------------------

    def descend(self, x) -> float:
        d = self.dimension
        fam_value = self.family.value
        nodes = self.nodes
        total = 0.0
        stack = [(key, 0) for key in self.roots]
        while stack:
            (lv, ix), start = stack.pop()
            prod = 1.0
            for j in range(d):
                prod *= fam_value(lv[j], ix[j], x[j])
            total += nodes[(lv, ix)] * prod
            for k in range(start, d):
                l, i = lv[k], ix[k]
                if l < 1:
                    continue
                son_i = 2 * i - 1 if x[k] <= i * 2.0**-l else 2 * i + 1
                son = (lv[:k] + (l + 1,) + lv[k + 1:],
                       ix[:k] + (son_i,) + ix[k + 1:])
                if son in nodes:
                    stack.append((son, k))
        return total

    # -- vectorized evaluation -------------------------------------------------

    def eval_batch(self, X: np.ndarray) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.dimension:
            raise ValueError("points must be shaped (P, d)")
        out = np.empty(len(X))
        for lo in range(0, len(X), _BATCH_CHUNK):
            sl = slice(lo, min(lo + _BATCH_CHUNK, len(X)))
            out[sl] = self._eval_chunk(X[sl])
        return out

    def _eval_chunk(self, X):
        P = len(X)
        family = self.family
        cache: dict[tuple[int, int], tuple] = {}

        def dim_level(j, l):
            key = (j, l)
            hit = cache.get(key)
            if hit is None:
                xj = X[:, j]
                c = np.floor(xj * (1 << l)).astype(np.int64)
                np.clip(c, 0, (1 << l) - 1, out=c)
                i = c | 1
                hit = (i >> 1, family.values(l, i, xj))
                cache[key] = hit
            return hit

        out = np.zeros(P)
        for combo in self.combos:
            code = np.zeros(P, dtype=np.int64)
            val = np.ones(P)
            for j, l in enumerate(combo.levels):
                if l == 0:
                    continue
                pos, v = dim_level(j, l)
                code += pos * combo.strides[j]
                val = val * v
            if not combo.zero_dims:
                self._accumulate(out, combo, code, val)
                continue
            for mask in range(1 << len(combo.zero_dims)):
                vcode = code
                vval = val
                for b, j in enumerate(combo.zero_dims):
                    if mask >> b & 1:
                        vcode = vcode + combo.strides[j]
                        vval = vval * X[:, j]
                    else:
                        vval = vval * (1.0 - X[:, j])
                self._accumulate(out, combo, vcode, vval)
        return out

    @staticmethod
    def _accumulate(out, combo, code, val):
        if combo.dense is not None:
            out += combo.dense[code] * val
            return
        pos = np.searchsorted(combo.codes, code)
        np.clip(pos, 0, len(combo.codes) - 1, out=pos)
        hit = combo.codes[pos] == code
        if np.any(hit):
            out[hit] += combo.surplus[pos[hit]] * val[hit]

    # -- nodal bounds over the finest diagonal ---------------------------------

    def _diag_levels(self):
        d = self.dimension
        return [lv for lv in _interior_levels(d, self.diagonal)
                if sum(lv) == self.diagonal]

    def _nodal_values(self):
        """Dense per-diagonal-combo arrays of the represented function values.

        Stored nodes contribute their nodal values exactly (interpolation
        property); points the adaptive grid dropped are valued through the
        interpolant itself.
        """
        if self._nodal_dense is None:
            dense = {}
            for lv in self._diag_levels():
                shape = tuple(2**l - 1 for l in lv)
                axes = [(np.arange(1, 2**l) * 2.0**-l) for l in lv]
                mesh = np.meshgrid(*axes, indexing="ij")
                pts = np.stack([m.ravel() for m in mesh], axis=1)
                dense[lv] = self.eval_batch(pts).reshape(shape)
            self._nodal_dense = dense
        return self._nodal_dense

    def bounds_batch(self, X):
        X = np.ascontiguousarray(X, dtype=float)
        P = len(X)
        lo = np.full(P, np.inf)
        hi = np.full(P, -np.inf)
        dense = self._nodal_values()
        d = self.dimension
        for lv, values in dense.items():
            flat = values.ravel()
            cand = []
            for j, l in enumerate(lv):
                scaled = X[:, j] * (1 << l)
                c = np.floor(scaled).astype(np.int64)
                np.clip(c, 0, (1 << l) - 1, out=c)
                exact_hit = (scaled == c) & (c >= 1)
                v_lo = c >= 1
                v_hi = (c + 1 <= 2**l - 1) & ~exact_hit
                cand.append((c, v_lo, v_hi))
            stride = [int(np.prod(values.shape[j + 1:])) for j in range(d)]
            for mask in range(1 << d):
                code = np.zeros(P, dtype=np.int64)
                ok = np.ones(P, dtype=bool)
                for j in range(d):
                    c, v_lo, v_hi = cand[j]
                    if mask >> j & 1:
                        ok &= v_hi
                        code += c * stride[j]  # nodal index c+1, zero-based
                    else:
                        ok &= v_lo
                        code += (c - 1) * stride[j]
                if not np.any(ok):
                    continue
                np.clip(code, 0, len(flat) - 1, out=code)
                v = flat[code]
                lo[ok] = np.minimum(lo[ok], v[ok])
                hi[ok] = np.maximum(hi[ok], v[ok])
        return lo, hi


class Interpolant:
    """A grid with current surpluses, a family, and the truncation switch."""

    def __init__(self, grid: AdaptiveSparseGrid,
                 family: BasisFamily | None = None, truncate: bool = False):
        self.grid = grid
        self.family = family or family_for(grid)
        self.truncate = truncate
        self._snap: _Snapshot | None = None
        self._snap_key = None

    def snapshot(self) -> _Snapshot:
        key = (self.grid.version, self.grid.data_version, id(self.grid))
        if self._snap is None or self._snap_key != key:
            self._snap = _Snapshot(self.grid, self.family)
            self._snap_key = key
        return self._snap

    def refresh(self) -> None:
        """Drop the cached snapshot after surpluses changed in place."""
        self._snap = None

    def __call__(self, X):
        return self.eval_batch(X)

    def eval_batch(self, X, truncate: bool | None = None):
        truncate = self.truncate if truncate is None else truncate
        snap = self.snapshot()
        vals = snap.eval_batch(np.atleast_2d(X))
        if truncate and self.family.order > 1:
            lo, hi = snap.bounds_batch(np.atleast_2d(X))
            return np.clip(vals, lo, hi)
        return vals

    def eval_batch_counting(self, X):
        """Truncated values plus the number of points the clamp engaged on."""
        snap = self.snapshot()
        X = np.atleast_2d(X)
        vals = snap.eval_batch(X)
        if self.family.order == 1:
            return vals, 0
        lo, hi = snap.bounds_batch(X)
        clipped = np.clip(vals, lo, hi)
        return clipped, int(np.count_nonzero(clipped != vals))

    def envelope_batch(self, X, side: str):
        snap = self.snapshot()
        lo, hi = snap.bounds_batch(np.atleast_2d(X))
        if side == "lower":
            return lo
        if side == "upper":
            return hi
        raise ValueError(f"side must be 'lower' or 'upper', got {side!r}")


def _check_point(itp: Interpolant, x) -> np.ndarray:
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape != (itp.grid.dimension,):
        raise ValueError(f"point must have dimension {itp.grid.dimension}")
    if np.any(x < 0.0) or np.any(x > 1.0):
        raise ValueError(f"point {x} outside the unit cube")
    return x


def evaluate(itp: Interpolant, x) -> float:
    """Tree-descent evaluation at one point of the unit cube."""
    return itp.snapshot().descend(_check_point(itp, x))


def naive_evaluate(itp: Interpolant, x) -> float:
    """Full summation over all stored nodes; the descent oracle."""
    x = _check_point(itp, x)
    fam = itp.family
    total = 0.0
    for lv, ix in itp.grid.sorted_keys():
        prod = itp.grid.node((lv, ix)).surplus
        for j in range(len(lv)):
            if prod == 0.0:
                break
            prod *= fam.value(lv[j], ix[j], x[j])
        total += prod
    return total


def evaluate_batch(itp: Interpolant, X) -> np.ndarray:
    return itp.eval_batch(X, truncate=False)


def evaluate_truncated(itp: Interpolant, x) -> float:
    """Interpolant value clamped to the nodal bounds of the finest diagonal.

    For the linear family this is the plain value.
    """
    x = _check_point(itp, x)
    val = itp.snapshot().descend(x)
    if itp.family.order == 1:
        return val
    lo, hi = itp.snapshot().bounds_batch(x[None, :])
    return float(min(max(val, lo[0]), hi[0]))


def evaluate_envelope(itp: Interpolant, x, side: str) -> float:
    """Lower/upper nodal bound of the represented function at ``x``."""
    x = _check_point(itp, x)
    return float(itp.envelope_batch(x[None, :], side)[0])
