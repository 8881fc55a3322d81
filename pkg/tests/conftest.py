import itertools

import numpy as np
import pytest

from sghjb.basis import BasisFamily, hierarchize
from sghjb.grid import EXACT, MODIFIED, make_regular_grid

ALL_FAMILIES = [BasisFamily(p, mode)
                for p in (1, 2, 3) for mode in (EXACT, MODIFIED)]


def family_ids(fam):
    return fam.name


@pytest.fixture(params=ALL_FAMILIES, ids=family_ids)
def family(request):
    return request.param


def random_adaptive_grid(rng, d, n, family, extra=20, max_level=8):
    """A regular grid plus a few random refinement rounds with random data."""
    grid = make_regular_grid(d, n, family.boundary_mode, family.order)
    keys = [k for k in grid.sorted_keys() if not grid.is_boundary(k)]
    picks = rng.choice(len(keys), size=min(extra, len(keys)), replace=False)
    for p in picks:
        lv, ix = keys[p]
        for dim in range(d):
            if lv[dim] + 1 <= max_level:
                for child in grid.child_keys((lv, ix), dim):
                    grid.insert_with_ancestors(*child)
    grid.set_values(rng.standard_normal(len(grid)))
    hierarchize(grid, family=family)
    grid.check_invariants()
    return grid


def brute_force_regular_keys(d, n, boundary_mode):
    """Independent enumeration oracle for the regular construction."""
    keys = set()
    budget = n + d - 1
    low = 0 if boundary_mode == EXACT else 1
    for lv in itertools.product(range(low, budget + 1), repeat=d):
        if sum(max(l, 1) for l in lv) > budget:
            continue
        ranges = []
        for l in lv:
            ranges.append((0, 1) if l == 0 else tuple(range(1, 2**l, 2)))
        for ix in itertools.product(*ranges):
            keys.add((lv, ix))
    return keys


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
