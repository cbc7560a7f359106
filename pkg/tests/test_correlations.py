import math
import warnings

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.special import spherical_jn

from dipolecavity.correlations import (
    BALL,
    NONE,
    SHELL,
    CavityGeometry,
    ball_indicator_ft,
    cavity_correlation,
    cavity_hc_ft,
    no_correlation,
    shell_correlation,
    shell_gc_ft,
)
from dipolecavity.errors import DomainError, GeometryError, ValidityWarning


def _numeric_radial_ft(q, a, b):
    """3D transform of the indicator of ``a < r < b``."""
    return quad(lambda r: 4 * math.pi * r * math.sin(q * r) / q, a, b,
                epsabs=0.0, epsrel=1e-12, limit=200)[0]


class TestBallIndicator:
    def test_volume_limit(self):
        assert ball_indicator_ft(0.0, 1.0) == pytest.approx(4 * math.pi / 3, rel=1e-15)
        assert ball_indicator_ft(1e-6, 1.0) == pytest.approx(4 * math.pi / 3, rel=1e-12)

    def test_q_r_pi(self):
        assert ball_indicator_ft(math.pi, 1.0) == pytest.approx(4.0 / math.pi, rel=1e-14)

    def test_accurate_across_series_switch(self):
        # 4 pi R^3 j1(x)/x is free of the cancellation in sin x - x cos x
        x = np.array([1e-6, 1e-4, 0.01, 0.049, 0.051, 0.2, 1.0])
        ref = 4 * math.pi * spherical_jn(1, x) / x
        np.testing.assert_allclose(ball_indicator_ft(x, 1.0), ref, rtol=1e-13)

    def test_matches_numeric(self):
        for q in (0.3, 2.0, 17.0):
            assert ball_indicator_ft(q, 0.7) == pytest.approx(_numeric_radial_ft(q, 0, 0.7),
                                                              rel=1e-10, abs=1e-13)

    def test_decay(self):
        qs = np.array([1e3, 1e4])
        v = np.abs(ball_indicator_ft(qs, 1.0)) * qs ** 2
        assert np.all(v <= 4 * math.pi + 1e-9)

    def test_even(self):
        assert ball_indicator_ft(-2.0, 1.0) == ball_indicator_ft(2.0, 1.0)

    def test_radius_must_be_positive(self):
        with pytest.raises(DomainError):
            ball_indicator_ft(1.0, 0.0)


class TestCavity:
    def test_hc(self):
        g = CavityGeometry(1.0)
        assert cavity_hc_ft(0.0, g) == pytest.approx(-4 * math.pi / 3)
        assert cavity_hc_ft(math.pi, g) == pytest.approx(-4.0 / math.pi)

    def test_vanishing_cavity(self):
        assert abs(cavity_hc_ft(3.0, CavityGeometry(1e-9))) < 1e-25

    def test_correlation_object(self):
        c = cavity_correlation(CavityGeometry(0.4))
        assert c.kind == BALL
        assert c.delta_weight == 1.0
        assert c.value_at_origin == -1.0
        assert c(2.0) == pytest.approx(cavity_hc_ft(2.0, CavityGeometry(0.4)))
        assert c.volume_integral == pytest.approx(-4 * math.pi * 0.4 ** 3 / 3)


class TestShell:
    def test_volume_limit(self):
        # transform of +indicator(R0 < r < R1)
        g = CavityGeometry(0.5, 1.0)
        assert shell_gc_ft(0.0, g) == pytest.approx(4 * math.pi * 0.875 / 3, rel=1e-14)
        assert shell_gc_ft(0.0, g) == pytest.approx(3.6652, abs=1e-4)

    def test_empty_shell(self):
        g = CavityGeometry(0.5, 0.5)
        assert shell_gc_ft(2.0, g) == 0.0
        c = shell_correlation(g)
        assert c.is_zero and c(1.0) == 0.0

    def test_numeric_ft(self):
        g = CavityGeometry(0.5, 1.0)
        assert shell_gc_ft(2.0, g) == pytest.approx(_numeric_radial_ft(2.0, 0.5, 1.0), abs=1e-12)
        assert shell_gc_ft(2.0, g) == pytest.approx(2.2626102479087256, rel=1e-13)

    def test_needs_molecule(self):
        with pytest.raises(GeometryError):
            shell_gc_ft(1.0, CavityGeometry(0.5))
        with pytest.raises(GeometryError):
            shell_correlation(CavityGeometry(0.5))

    def test_correlation_object(self):
        g = CavityGeometry(0.2, 0.6)
        c = shell_correlation(g)
        assert c.kind == SHELL and c.delta_weight == 0.0
        assert c.value_at_origin == 0.0
        assert c.radii == (0.6, 0.2)
        np.testing.assert_allclose(c(np.array([0.0, 1.0, 5.0])),
                                   shell_gc_ft(np.array([0.0, 1.0, 5.0]), g))


def test_no_correlation():
    c = no_correlation()
    assert c.kind == NONE and c.is_zero and c(3.0) == 0.0


class TestGeometry:
    def test_validation(self):
        with pytest.raises(GeometryError):
            CavityGeometry(0.0)
        with pytest.raises(GeometryError):
            CavityGeometry(0.5, 0.4)
        assert CavityGeometry(0.5, 0.5).is_molecule
        assert not CavityGeometry(0.5).is_molecule
        assert CavityGeometry(0.5).outer_radius == 0.5

    def test_small_molecule_warning(self):
        g = CavityGeometry(0.1, 0.8)
        with pytest.warns(ValidityWarning):
            assert not g.check_small_molecule(1.0)
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            assert g.check_small_molecule(0.5)
