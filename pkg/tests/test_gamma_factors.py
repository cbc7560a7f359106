import math

import numpy as np
import pytest

from dipolecavity.correlations import CavityGeometry, shell_correlation
from dipolecavity.emission import PERP_ORDER1, _paper_expansion_gamma
from dipolecavity.errors import DomainError
from dipolecavity.gamma_factors import (
    ChiSeries,
    GammaFactors,
    _first_order_exact,
    gamma_1pi_form,
    gamma_closed_form,
    gamma_series_a,
    gamma_series_b,
    split_p_np,
    vacuum_gamma,
)
from dipolecavity.propagators import WaveContext, self_energy
from dipolecavity.pseudo_susceptibility import (
    ChiPair,
    chi_first_order_molecule,
    chi_states,
    chi_total_small_molecule,
    decompose_resummed,
    molecule_grid,
    pseudo_propagator,
)
from dipolecavity.spectral import SpectralFunction, SpectralPair

CTX = WaveContext()
GEOM = CavityGeometry(0.1, 0.3)
EPS = 1.1


@pytest.fixture(scope="module")
def grid():
    return molecule_grid(GEOM, CTX, 80.0)


@pytest.fixture(scope="module")
def series(grid):
    return ChiSeries(grid, shell_correlation(GEOM), EPS, CTX)


@pytest.fixture(scope="module")
def series_a(series):
    return gamma_series_a(series, series.sigma, CTX)


@pytest.fixture(scope="module")
def uniform_field(grid):
    chi1 = chi_first_order_molecule(GEOM, CTX, grid=grid)
    return chi_total_small_molecule(chi1, EPS)


def _rel(a, b):
    return abs(a - b) / abs(b)


def test_vacuum_gamma():
    g = vacuum_gamma(CTX)
    assert g.two_gamma_perp == -1j and g.gamma_par == 0
    assert g.total == -1j
    perp, par = g.physical()
    assert perp == pytest.approx(-1j / (2 * math.pi))


def test_unit_ratio_gives_vacuum(grid):
    one = SpectralFunction.constant(grid, 1.0)
    g = gamma_closed_form(SpectralPair(one, one), CTX)
    assert abs(g.two_gamma_perp + 1j) < 1e-14
    assert abs(g.gamma_par) < 1e-14
    assert g.two_gamma_perp_pole == -1j


def test_grid_must_match_k_tilde(grid):
    one = SpectralFunction.constant(grid, 1.0)
    with pytest.raises(DomainError):
        gamma_closed_form(SpectralPair(one, one), CTX.at(2.0))


def test_unit_eps_series_is_vacuum(grid):
    s = ChiSeries(grid, shell_correlation(GEOM), 1.0, CTX)
    for g in (gamma_series_a(s, s.sigma, CTX), gamma_series_b(s, s.sigma, CTX)):
        assert g.two_gamma_perp == -1j and g.gamma_par == 0


def test_series_a_equals_series_b(series, series_a):
    gb = gamma_series_b(series, series.sigma, CTX)
    assert _rel(gb.total, series_a.total) < 1e-7
    assert series_a.diagnostics["terms"] == gb.diagnostics["terms"]


def test_series_a_transverse_equals_closed_form_of_recursion_sum(series, series_a):
    n = series_a.diagnostics["terms"]
    perp = sum((series[i].ratio_perp for i in range(1, n)), series[0].ratio_perp)
    par = sum((series[i].ratio_par for i in range(1, n)), series[0].ratio_par)
    rest_p = sum((series[i].ratio_perp for i in range(3, n)), series[2].ratio_perp)
    rest_l = sum((series[i].ratio_par for i in range(3, n)), series[2].ratio_par)
    pair = ChiPair(perp, par, chi0=series[0].chi0,
                   first_order=SpectralPair(series[1].ratio_perp, series[1].ratio_par),
                   first_order_gamma=_first_order_exact(series, CTX),
                   remainder=SpectralPair(rest_p, rest_l))
    g = gamma_closed_form(pair, CTX)
    assert abs(g.two_gamma_perp - series_a.two_gamma_perp) < 1e-10


def test_series_a_matches_uniform_field_closed_form(series_a, uniform_field):
    # the uniform-field resummation is compared against the exact recursion
    g = gamma_closed_form(uniform_field, CTX)
    assert _rel(g.total, series_a.total) < 1e-6


def test_series_need_shell_states(grid):
    states = chi_states(grid, shell_correlation(GEOM), EPS, CTX, 2)
    with pytest.raises(DomainError):
        gamma_series_a(states, self_energy(EPS, CTX), CTX)


def test_closed_form_equals_1pi_form(uniform_field):
    closed = gamma_closed_form(uniform_field, CTX)
    dec = decompose_resummed(uniform_field)
    one = gamma_1pi_form(dec, pseudo_propagator(dec, self_energy(EPS, CTX), CTX), CTX)
    assert abs(one.two_gamma_perp - closed.two_gamma_perp) < 1e-10 * abs(closed.total)
    assert abs(one.gamma_par - closed.gamma_par) < 1e-10 * abs(closed.total)


def test_first_order_transverse_matches_expansion():
    g = molecule_grid(CavityGeometry(0.05, 0.2), CTX, 400.0)
    pair = chi_total_small_molecule(chi_first_order_molecule(CavityGeometry(0.05, 0.2), CTX,
                                                             grid=g), 1.2)
    pipe = gamma_closed_form(pair, CTX)
    ref = _paper_expansion_gamma(CavityGeometry(0.05, 0.2), 1.2, CTX)
    got = -pipe.two_gamma_perp_pole.imag - 1.0
    want = -ref.two_gamma_perp.imag - 1.0
    assert got == pytest.approx(want, rel=0.01)
    assert got == pytest.approx(PERP_ORDER1["quadratic"] * 0.2 * (0.2 ** 2 - 0.05 ** 2), rel=0.02)


class TestSplit:
    def test_vacuum(self, grid):
        one = SpectralFunction.constant(grid, 1.0)
        zero = SpectralFunction.constant(grid, 0.0)
        dec = decompose_resummed(ChiPair(one, one, chi0=1.0))
        gp, gnp = split_p_np(dec, pseudo_propagator(dec, self_energy(1.0, CTX), CTX), CTX)
        assert abs(gp + 1j) < 1e-14
        assert abs(gnp) < 1e-14
        assert zero.max_abs() == 0

    def test_completeness(self, uniform_field):
        dec = decompose_resummed(uniform_field)
        pp = pseudo_propagator(dec, self_energy(EPS, CTX), CTX)
        g = gamma_1pi_form(dec, pp, CTX)
        gp, gnp = split_p_np(dec, pp, CTX)
        assert abs((gp + gnp).imag - g.total.imag) < 1e-9
        assert gp.real == 0.0

    def test_real_ratio_has_no_extra_np_term(self, uniform_field):
        real = ChiPair(uniform_field.perp.map(np.real), uniform_field.par.map(np.real),
                       chi0=uniform_field.chi0)
        dec = decompose_resummed(real)
        pp = pseudo_propagator(dec, self_energy(EPS, CTX), CTX)
        g = gamma_1pi_form(dec, pp, CTX)
        _, gnp = split_p_np(dec, pp, CTX)
        assert abs(gnp - g.gamma_par) < 1e-12 * max(1.0, abs(g.gamma_par))


def test_gamma_factors_total():
    g = GammaFactors(1 + 2j, 3 - 1j, k_tilde=2.0)
    assert g.total == 4 + 1j
    assert g.physical()[1] == pytest.approx((3 - 1j) / math.pi)
