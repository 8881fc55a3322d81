import numpy as np
import pytest

from sghjb.basis import BasisFamily, dehierarchize, hierarchize
from sghjb.grid import EXACT, MODIFIED, make_regular_grid, node_coordinate
from sghjb.interp import (
    Interpolant,
    evaluate,
    evaluate_batch,
    evaluate_envelope,
    evaluate_truncated,
    naive_evaluate,
)

from conftest import ALL_FAMILIES, random_adaptive_grid


class TestEvaluate:
    def test_reproduces_nodal_values_at_grid_points(self, family, rng):
        grid = random_adaptive_grid(rng, 2, 3, family)
        itp = Interpolant(grid, family)
        vals = grid.values_array()
        for key, v in zip(grid.sorted_keys(), vals):
            x = node_coordinate(key)
            assert evaluate(itp, x) == pytest.approx(v, abs=1e-12)

    def test_constant_root_pattern_modified(self):
        grid = make_regular_grid(2, 3, MODIFIED)
        s = np.zeros(len(grid))
        s[grid.key_rows()[((1, 1), (1, 1))]] = 1.0
        grid.set_surpluses(s)
        itp = Interpolant(grid)
        for x in np.random.default_rng(0).uniform(0, 1, size=(25, 2)):
            assert evaluate(itp, x) == pytest.approx(1.0, abs=1e-14)

    def test_matches_naive_sum_product_function(self):
        grid = make_regular_grid(2, 3, EXACT)
        c = grid.coordinates_array()
        hierarchize(grid, values=c[:, 0] * c[:, 1])
        itp = Interpolant(grid)
        x = np.array([0.3, 0.7])
        assert evaluate(itp, x) == pytest.approx(naive_evaluate(itp, x), abs=1e-12)

    def test_descent_equals_naive_on_200_random_grids(self, rng):
        count = 0
        while count < 200:
            family = ALL_FAMILIES[count % len(ALL_FAMILIES)]
            d = 1 + count % 3
            grid = random_adaptive_grid(rng, d, 2 + count % 2, family, extra=8)
            itp = Interpolant(grid, family)
            for x in rng.uniform(0, 1, size=(3, d)):
                assert abs(evaluate(itp, x) - naive_evaluate(itp, x)) < 1e-12
            count += 1

    def test_batch_matches_descent(self, family, rng):
        grid = random_adaptive_grid(rng, 2, 4, family)
        itp = Interpolant(grid, family)
        X = rng.uniform(0, 1, size=(200, 2))
        batch = evaluate_batch(itp, X)
        for k in range(len(X)):
            assert batch[k] == pytest.approx(evaluate(itp, X[k]), abs=1e-12)

    def test_rejects_points_outside_unit_cube(self):
        grid = make_regular_grid(2, 2, MODIFIED)
        itp = Interpolant(grid)
        with pytest.raises(ValueError):
            evaluate(itp, [1.1, 0.5])


class TestTruncation:
    def test_linear_family_untouched(self, rng):
        grid = random_adaptive_grid(rng, 2, 3, BasisFamily(1, MODIFIED))
        itp = Interpolant(grid, truncate=True)
        for x in rng.uniform(0, 1, size=(50, 2)):
            assert evaluate_truncated(itp, x) == evaluate(itp, x)

    def test_grid_point_of_finest_level_returns_nodal_value(self):
        fam = BasisFamily(2, MODIFIED)
        grid = make_regular_grid(1, 3, MODIFIED, order=2)
        rng = np.random.default_rng(7)
        hierarchize(grid, values=rng.standard_normal(len(grid)))
        itp = Interpolant(grid, fam)
        for key in grid.sorted_keys():
            x = node_coordinate(key)
            v = grid.node(key).nodal_value
            assert evaluate_truncated(itp, x) == pytest.approx(v, abs=1e-12)

    def test_kink_overshoot_is_clamped(self):
        # cubic interpolation of a kink off the dyadic points overshoots
        fam = BasisFamily(3, EXACT)
        grid = make_regular_grid(1, 4, EXACT, order=3)
        c = grid.coordinates_array()[:, 0]
        hierarchize(grid, values=np.abs(c - 0.3))
        itp = Interpolant(grid, fam, truncate=True)
        snap = itp.snapshot()
        engaged = 0
        for x in np.linspace(0.10, 0.50, 201):
            raw = evaluate(itp, [x])
            clamped = evaluate_truncated(itp, [x])
            lo, hi = snap.bounds_batch(np.array([[x]]))
            assert lo[0] - 1e-14 <= clamped <= hi[0] + 1e-14
            if clamped != raw:
                engaged += 1
        assert engaged > 0

    def test_monotone_data_safety(self, rng):
        fam = BasisFamily(3, MODIFIED)
        grid = random_adaptive_grid(rng, 2, 3, fam)
        vals = rng.uniform(2.0, 3.0, size=len(grid))
        hierarchize(grid, values=vals)
        itp = Interpolant(grid, fam, truncate=True)
        X = rng.uniform(0, 1, size=(500, 2))
        out = itp.eval_batch(X)
        assert np.all(out >= 2.0 - 1e-12) and np.all(out <= 3.0 + 1e-12)


class TestEnvelopes:
    def test_bounds_bracket_truncated_value(self, rng):
        for fam in (BasisFamily(2, MODIFIED), BasisFamily(3, EXACT)):
            for d in (1, 2, 3):
                grid = random_adaptive_grid(rng, d, 3, fam, extra=6)
                itp = Interpolant(grid, fam, truncate=True)
                X = rng.uniform(0, 1, size=(10_000 // (d * 3), d))
                lo = itp.envelope_batch(X, "lower")
                hi = itp.envelope_batch(X, "upper")
                mid = itp.eval_batch(X)
                assert np.all(lo <= mid + 1e-12)
                assert np.all(mid <= hi + 1e-12)

    def test_finest_level_point_collapses_1d(self, rng):
        grid = make_regular_grid(1, 3, MODIFIED)
        hierarchize(grid, values=rng.standard_normal(len(grid)))
        itp = Interpolant(grid)
        for key in grid.sorted_keys():
            x = node_coordinate(key)
            v = grid.node(key).nodal_value
            assert evaluate_envelope(itp, x, "lower") == pytest.approx(v, abs=1e-12)
            assert evaluate_envelope(itp, x, "upper") == pytest.approx(v, abs=1e-12)

    def test_bounds_contain_nodal_value_at_every_node(self, rng):
        grid = make_regular_grid(2, 3, MODIFIED)
        hierarchize(grid, values=rng.standard_normal(len(grid)))
        itp = Interpolant(grid)
        for key in grid.sorted_keys():
            x = node_coordinate(key)
            v = grid.node(key).nodal_value
            assert evaluate_envelope(itp, x, "lower") <= v + 1e-12
            assert evaluate_envelope(itp, x, "upper") >= v - 1e-12

    def test_1d_example_zero_one_zero(self):
        grid = make_regular_grid(1, 2, MODIFIED)
        hierarchize(grid, values=np.array([1.0, 0.0, 0.0]))  # canonical order!
        # canonical order is (1,),(1,) then (2,),(1,) then (2,),(3,):
        # values at 0.5, 0.25, 0.75 -> set explicitly instead
        vals = {0.25: 0.0, 0.5: 1.0, 0.75: 0.0}
        ordered = [vals[node_coordinate(k)[0]] for k in grid.sorted_keys()]
        hierarchize(grid, values=ordered)
        itp = Interpolant(grid)
        assert evaluate_envelope(itp, [0.3], "lower") == 0.0
        assert evaluate_envelope(itp, [0.3], "upper") == 1.0

    def test_invalid_side_rejected(self):
        grid = make_regular_grid(1, 2, MODIFIED)
        itp = Interpolant(grid)
        with pytest.raises(ValueError):
            evaluate_envelope(itp, [0.5], "middle")


class TestConvergenceOrders:
    @pytest.mark.parametrize("order,floor", [(1, 1.8), (2, 2.7), (3, 3.5)])
    def test_empirical_interpolation_order(self, order, floor):
        d = 2
        xs = np.linspace(0, 1, 101)
        X = np.stack(np.meshgrid(xs, xs, indexing="ij"), axis=-1).reshape(-1, 2)
        target = np.sin(np.pi * X[:, 0]) * np.sin(np.pi * X[:, 1])
        logs = []
        levels = [4, 5, 6, 7]
        for n in levels:
            grid = make_regular_grid(d, n, EXACT, order=order)
            c = grid.coordinates_array()
            hierarchize(grid, values=np.sin(np.pi * c[:, 0]) * np.sin(np.pi * c[:, 1]))
            itp = Interpolant(grid, BasisFamily(order, EXACT))
            err = np.max(np.abs(itp.eval_batch(X) - target))
            logs.append(np.log2(err / np.log2(2.0**n) ** (d - 1)))
        slopes = np.polyfit(levels, logs, 1)
        assert -slopes[0] >= floor
