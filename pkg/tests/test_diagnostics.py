from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from edge_dynamics import cubic_map as cm
from edge_dynamics import diagnostics as dg
from edge_dynamics import phase_analysis as pa
from edge_dynamics.errors import DivergedError, InvalidParam

catapult_a = st.floats(min_value=cm.MONOTONE_LIMIT + 1e-9, max_value=1.0)


class TestLyapunov:
    def test_monotonic_limit(self):
        assert dg.lyapunov_exponent(0.3, 0.1, 100_000) == pytest.approx(math.log(0.4), abs=1e-3)

    def test_period_two(self):
        assert dg.lyapunov_exponent(1.2, 0.1, 100_000) == pytest.approx(0.5 * math.log(0.680), abs=1e-3)

    def test_superattracting_sentinel(self):
        assert dg.lyapunov_exponent(0.5, 0.1, 1000) == -math.inf

    def test_diverges(self):
        with pytest.raises(DivergedError):
            dg.lyapunov_exponent(2.1, 0.1, 1000)

    def test_bad_n(self):
        with pytest.raises(InvalidParam):
            dg.lyapunov_exponent(1.2, 0.1, 0)

    def test_sweep_signs(self):
        grid = dg.SweepGrid(0.9, 1.9, 3, burn_in=2000, keep=200)
        table = dg.lyapunov_sweep(grid, n=20_000)
        np.testing.assert_allclose(table.a, [0.9, 1.4, 1.9])
        assert table.exponent[0] < 0
        assert table.exponent[2] > 0
        assert table.flag == ("ok", "ok", "ok")
        assert dg.lyapunov_sweep(dg.SweepGrid(1.1, 1.3, 3), n=20_000).exponent[1] < 0

    def test_sweep_matches_scalar(self):
        grid = dg.SweepGrid(1.0, 1.9, 4, burn_in=100, keep=500)
        table = dg.lyapunov_sweep(grid)
        for a, lam in zip(table.a, table.exponent):
            assert lam == pytest.approx(dg.lyapunov_exponent(a, 0.1, 500, 100), rel=1e-9, abs=1e-12)

    def test_sweep_flags(self):
        table = dg.lyapunov_sweep(dg.SweepGrid(0.5, 2.5, 2, burn_in=10, keep=50))
        assert table.flag == ("neg_inf", "diverged")
        assert table.exponent[0] == -math.inf and math.isnan(table.exponent[1])

    def test_sign_agrees_with_attracting_orbit(self):
        for a in np.linspace(0.05, 1.58, 40):
            orb = pa.find_attracting_orbit(float(a))
            if orb is None:
                continue
            assert dg.lyapunov_exponent(float(a), (1 - 2 * a) / 3, 20_000, 2000) < 0


class TestBifurcation:
    def test_cells(self):
        grid = dg.SweepGrid(0.5, 1.9, 15, burn_in=2000, keep=200)
        table = dg.bifurcation_sweep(grid)
        assert table.values.shape == (200, 15)
        assert np.all(np.abs(table.nearest_cell(0.5)) <= 1e-8)
        cell = table.nearest_cell(1.2)
        assert dg.count_distinct(cell, 1e-6) == 2
        assert sorted(set(np.round(cell, 6))) == pytest.approx([-0.5582576, 0.3582576], abs=1e-6)
        assert dg.count_distinct(table.nearest_cell(1.9), 1e-3) > 10

    def test_divergent_cells_flagged(self):
        table = dg.bifurcation_sweep(dg.SweepGrid(1.9, 2.2, 4, burn_in=500, keep=10))
        assert table.diverged.tolist() == [False, False, True, True]
        assert np.all(np.isnan(table.cell(3)))
        assert all(a <= 2 for a, _ in table.rows())

    def test_deterministic(self):
        grid = dg.SweepGrid(0.1, 2.0, 200, burn_in=300, keep=20)
        t1, t2 = dg.bifurcation_sweep(grid), dg.bifurcation_sweep(grid)
        assert t1.values.tobytes() == t2.values.tobytes()

    def test_column_matches_scalar_orbit(self):
        grid = dg.SweepGrid(1.0, 1.9, 5, burn_in=100, keep=30)
        table = dg.bifurcation_sweep(grid)
        for i, a in enumerate(table.a):
            orbit = cm.iterate_orbit(float(a), 0.1, 130)
            np.testing.assert_array_equal(table.cell(i), orbit.points[101:])

    @pytest.mark.parametrize("kw", [dict(a_min=1.0, a_max=1.0), dict(steps=1), dict(keep=-1),
                                    dict(a_min=0.0)])
    def test_grid_validation(self, kw):
        with pytest.raises(InvalidParam):
            dg.SweepGrid(**kw)


class TestCountDistinct:
    def test_clusters(self):
        assert dg.count_distinct([0.0, 1e-7, 1.0, 1.0 + 5e-7, 2.0]) == 3
        assert dg.count_distinct([]) == 0
        assert dg.count_distinct([np.nan, 1.0]) == 1


class TestCatapultPartition:
    def test_a_one(self):
        part = dg.catapult_partition(1.0)
        s5 = math.sqrt(5)
        assert part.interval(2) == pytest.approx(((1 - s5) / 2, 0.0))
        assert part.interval(5)[0] == pytest.approx((1 + s5) / 2)
        assert part.verify()

    def test_quarter_image(self):
        # f_a(1/4) = 9/64 - 7a/16
        for a in (0.85, 0.9, 1.0):
            assert cm.eval_f(a, 0.25) == pytest.approx(9 / 64 - 7 * a / 16, abs=1e-15)
        lo, hi = dg.catapult_partition(1.0).interval(2)
        assert lo <= cm.eval_f(1.0, 0.25) <= hi

    def test_range(self):
        assert dg.catapult_partition(0.83).verify()
        with pytest.raises(InvalidParam):
            dg.catapult_partition(0.5)

    @given(catapult_a)
    def test_endpoint_ordering(self, a):
        part = dg.catapult_partition(a)
        assert -a <= part.left_root <= 0 <= 0.25 <= part.right_root <= 2

    @settings(max_examples=25)
    @given(catapult_a)
    def test_two_step_contraction(self, a):
        part = dg.catapult_partition(a)
        lo, hi = part.interval(2)[0], part.interval(3)[1]
        z = np.linspace(lo, hi, 1000)
        assert np.all(np.abs(cm.eval_f(a, cm.eval_f(a, z))) <= np.abs(z) + 1e-12)


class TestGrowthInterval:
    @settings(max_examples=40)
    @given(catapult_a, st.floats(min_value=1e-3, max_value=1 - 1e-3))
    def test_rises_exactly_inside(self, a, u):
        lo, hi = dg.catapult_growth_interval(a)
        z = lo + u * (hi - lo)
        assert abs(cm.eval_f(a, z)) > abs(z)

    @settings(max_examples=40)
    @given(catapult_a, st.floats(min_value=1e-6, max_value=1.0))
    def test_no_rise_below(self, a, u):
        lo, _ = dg.catapult_growth_interval(a)
        z = u * lo
        assert abs(cm.eval_f(a, z)) <= abs(z) * (1 + 1e-12)

    def test_starts_at_zero_only_for_a_one(self):
        assert dg.catapult_growth_interval(1.0)[0] == 0.0
        lo, hi = dg.catapult_growth_interval(0.9)
        assert lo > 0.1
        # small positive z contract for a < 1, contrary to growth starting at 0
        assert abs(cm.eval_f(0.9, 0.05)) < 0.05

    def test_range(self):
        with pytest.raises(InvalidParam):
            dg.catapult_growth_interval(1.2)
