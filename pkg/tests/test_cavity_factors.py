import math

import numpy as np
import pytest

from dipolecavity.cavity_factors import (
    GridSpec,
    CavityFactorTable,
    ball_cavity_factor,
    build_cavity_factor_table,
    cavity_factor_kspace,
    cavity_factor_realspace,
    correlation_cavity_factor,
    correlation_for,
    j1_over_y,
    leave_one_out_error,
    orientation_weights,
    shell_cavity_factor,
    zero_table,
)
from dipolecavity.correlations import (
    CavityGeometry,
    cavity_correlation,
    no_correlation,
    shell_correlation,
)
from dipolecavity.errors import DomainError, GeometryError, GridTooCoarse
from dipolecavity.propagators import WaveContext

# real-space values frozen from the current implementation (kt = 1)
BALL_03 = {0.0: (-0.30400496591732806 + 0.00594617328243851j,
                 -0.30400496591732806 + 0.00594617328243851j),
           1.0: (-0.3012094934251084 + 0.00589296692584236j,
                 -0.31024882060462233 + 0.0058928294507976j)}
SHELL_01_04_K0 = -0.04789388265575781 - 0.01377396305898059j


def _rel(a, b):
    return np.max(np.abs(np.asarray(a) - np.asarray(b)) / np.abs(np.asarray(b)))


class TestRealSpace:
    def test_frozen_ball(self, ctx):
        for k, (p, l) in BALL_03.items():
            cp, cl = ball_cavity_factor(k, 0.3, ctx)
            assert abs(cp - p) < 1e-13 and abs(cl - l) < 1e-13

    def test_frozen_shell(self, ctx):
        cp, cl = shell_cavity_factor(0.0, CavityGeometry(0.1, 0.4), ctx)
        assert abs(cp - SHELL_01_04_K0) < 1e-13
        assert cp == cl

    def test_small_ball_expansion(self, ctx):
        # -1/3 contact term plus (kt R)^2 and (kt R)^3 corrections; 11/30 is
        # the on-shell transverse coefficient
        x = 0.01
        for k, c_perp, c_par in ((0.0, 1 / 3, 1 / 3), (1.0, 11 / 30, 4 / 15)):
            cp, cl = ball_cavity_factor(k, x, ctx)
            assert (cp.real + 1 / 3) / x ** 2 == pytest.approx(c_perp, rel=1e-3)
            assert (cl.real + 1 / 3) / x ** 2 == pytest.approx(c_par, rel=1e-3)
            assert cp.imag / x ** 3 == pytest.approx(2 / 9, rel=1e-4)

    def test_isotropic_at_origin(self, ctx):
        cp, cl = ball_cavity_factor(0.0, 0.7, ctx)
        assert cp == pytest.approx(cl, rel=1e-14)

    def test_empty_shell(self, ctx):
        cp, cl = shell_cavity_factor(np.array([0.0, 1.0, 3.0]), CavityGeometry(0.2, 0.2), ctx)
        assert np.all(cp == 0) and np.all(cl == 0)

    def test_shell_is_difference_of_balls(self, ctx):
        k = np.array([0.0, 0.5, 1.0, 2.0, 7.0])
        sp, sl = shell_cavity_factor(k, CavityGeometry(0.1, 0.4), ctx)
        p0, l0 = ball_cavity_factor(k, 0.1, ctx)
        p1, l1 = ball_cavity_factor(k, 0.4, ctx)
        np.testing.assert_allclose(sp, p0 - p1, atol=1e-15)
        np.testing.assert_allclose(sl, l0 - l1, atol=1e-15)

    def test_correlation_route(self, ctx):
        geom = CavityGeometry(0.1, 0.4)
        k = np.array([0.0, 1.3])
        np.testing.assert_allclose(correlation_cavity_factor(k, shell_correlation(geom), ctx),
                                   shell_cavity_factor(k, geom, ctx), atol=1e-15)

    def test_errors(self, ctx):
        with pytest.raises(DomainError):
            cavity_factor_realspace(-1.0, CavityGeometry(0.1), "ball", ctx)
        with pytest.raises(GeometryError):
            cavity_factor_realspace(1.0, CavityGeometry(0.1), "shell", ctx)
        with pytest.raises(DomainError):
            cavity_factor_realspace(1.0, CavityGeometry(0.1), "cube", ctx)


class TestKSpace:
    def test_no_correlation(self, ctx):
        cp, cl = cavity_factor_kspace(np.array([0.0, 2.0]), no_correlation(), ctx)
        assert np.all(cp == 0) and np.all(cl == 0)

    @pytest.mark.parametrize("k", [0.0, 1.0])
    def test_ball_routes_agree(self, ctx, k):
        geom = CavityGeometry(0.3)
        kp, kl = cavity_factor_kspace(np.array([k]), cavity_correlation(geom), ctx)
        rp, rl = cavity_factor_realspace(np.array([k]), geom, "ball", ctx)
        assert _rel(kp, rp) < 1e-6 and _rel(kl, rl) < 1e-6

    def test_shell_routes_agree(self, ctx):
        geom = CavityGeometry(0.1, 0.4)
        kp, kl = cavity_factor_kspace(np.array([0.0]), shell_correlation(geom), ctx)
        rp, rl = cavity_factor_realspace(np.array([0.0]), geom, "shell", ctx)
        assert _rel(kp, rp) < 1e-6 and _rel(kl, rl) < 1e-6

    def test_other_k_tilde(self):
        c = WaveContext(k_tilde=2.0)
        geom = CavityGeometry(0.1)
        k = np.array([0.5, 2.0, 5.0])
        kp, kl = cavity_factor_kspace(k, cavity_correlation(geom), c)
        rp, rl = cavity_factor_realspace(k, geom, "ball", c)
        assert _rel(kp, rp) < 1e-6 and _rel(kl, rl) < 1e-6


class TestWeights:
    def test_j1_over_y(self):
        assert j1_over_y(0.0) == pytest.approx(1 / 3)
        y = np.array([1e-4, 2e-3, 1.0])
        from scipy.special import spherical_jn
        np.testing.assert_allclose(j1_over_y(y), spherical_jn(1, y) / y, rtol=1e-12)

    def test_orientation_weights_sum_to_volume_sign(self):
        corr = shell_correlation(CavityGeometry(0.2, 0.5))
        wc, ws = orientation_weights(np.array([0.0, 1.0, 10.0]), corr)
        # each ball contributes sign * (W_c + W_s) = sign, and the shell signs cancel
        np.testing.assert_allclose(wc + ws, 0.0, atol=1e-15)
        wc, ws = orientation_weights(np.array([0.0]), cavity_correlation(CavityGeometry(0.3)))
        assert wc[0] == pytest.approx(-1 / 3) and ws[0] == pytest.approx(-2 / 3)


class TestTable:
    def test_leave_one_out_default_grid(self, ctx):
        table = build_cavity_factor_table(CavityGeometry(0.3), "ball", ctx)
        assert table.loo_error < 1e-6
        assert table.kind == "ball-exclusion"

    def test_grid_points_reproduce_direct_values(self, ctx):
        geom = CavityGeometry(0.1, 0.4)
        table = build_cavity_factor_table(geom, "shell", ctx)
        idx = [0, 5, len(table.grid) // 2, len(table.grid) - 1]
        cp, cl = table(table.grid[idx])
        rp, rl = shell_cavity_factor(table.grid[idx], geom, ctx)
        np.testing.assert_allclose(cp, rp, rtol=1e-12)
        np.testing.assert_allclose(cl, rl, rtol=1e-12)

    def test_interpolation_between_nodes(self, ctx):
        geom = CavityGeometry(0.3)
        table = build_cavity_factor_table(geom, "ball", ctx)
        k = 0.5 * (table.grid[10:40] + table.grid[11:41])
        cp, _ = table(k)
        rp, _ = ball_cavity_factor(k, 0.3, ctx)
        assert np.max(np.abs(cp - rp)) / np.max(np.abs(rp)) < 1e-6

    def test_zero_table(self, ctx):
        t = zero_table(ctx)
        cp, cl = t(np.array([0.0, 1.0, 3.0]))
        assert np.all(cp == 0) and np.all(cl == 0)

    def test_coarse_grid_rejected(self, ctx):
        spec = GridSpec(n_core=6, n_tail=3, max_phase_step=5.0, loo_tol=1e-12)
        with pytest.raises(GridTooCoarse):
            build_cavity_factor_table(CavityGeometry(0.3), "ball", ctx, spec)

    def test_out_of_range(self, ctx):
        t = build_cavity_factor_table(CavityGeometry(0.3), "ball", ctx, check=False)
        with pytest.raises(DomainError):
            t(t.k_max * 1.01)

    def test_csv_round_trip(self, ctx, tmp_path):
        t = build_cavity_factor_table(CavityGeometry(0.1, 0.4), "shell", ctx, check=False)
        path = tmp_path / "table.csv"
        t.to_csv(path)
        back = CavityFactorTable.from_csv(path)
        np.testing.assert_array_equal(back.grid, t.grid)
        np.testing.assert_array_equal(back.c_perp, t.c_perp)
        np.testing.assert_array_equal(back.c_par, t.c_par)
        assert back.geometry == t.geometry and back.kind == t.kind

    def test_table_validation(self):
        with pytest.raises(DomainError):
            CavityFactorTable(np.array([0.0, 0.0, 1.0]), np.zeros(3), np.zeros(3))

    def test_leave_one_out_on_smooth_data(self):
        x = np.linspace(0, 1, 50)
        assert leave_one_out_error(x, np.sin(x)) < 1e-6
        assert leave_one_out_error(x, np.zeros(50)) == 0.0


def test_correlation_for():
    assert correlation_for(CavityGeometry(0.1, 0.2)).kind == "shell"
    assert correlation_for(CavityGeometry(0.1)).kind == "ball-exclusion"
