import math

import numpy as np
import pytest

from dipolecavity.errors import DomainError
from dipolecavity.propagators import (
    MediumSpec,
    WaveContext,
    bulk_longitudinal,
    bulk_transverse,
    dyadic_coefficients,
    dyson_transverse,
    free_longitudinal,
    free_transverse,
    radial_transverse_im_integral,
    real_space_dyadic_traces,
    self_energy,
    transverse_residue_integral,
    vacuum_regulator,
)


def test_free_transverse_values(ctx):
    assert free_transverse(0.0, ctx) == 1.0
    assert free_transverse(2.0, ctx) == pytest.approx(-1.0 / 3.0, rel=1e-15)
    assert free_transverse(np.array([0.0, 2.0]), ctx).shape == (2,)


def test_free_transverse_rejects_negative_k(ctx):
    with pytest.raises(DomainError):
        free_transverse(-1.0, ctx)


def test_free_longitudinal_is_constant():
    # sign convention: +1/kt^2, fixed by the near-field coefficient table
    assert free_longitudinal(3.0, WaveContext()) == 1.0
    assert free_longitudinal(0.0, WaveContext(k_tilde=2.0)) == 0.25
    assert np.all(free_longitudinal(np.linspace(0, 5, 4), WaveContext()) == 1.0)


def test_bulk_transverse(ctx):
    ks = np.linspace(0.0, 3.0, 7)
    np.testing.assert_allclose(bulk_transverse(ks, 1.0, ctx), free_transverse(ks, ctx))
    assert bulk_transverse(0.0, 2.25, ctx) == pytest.approx(1.0 / 2.25, rel=1e-15)


def test_bulk_transverse_lossy_is_complex(ctx):
    v = bulk_transverse(1.0, 2.0 + 0.1j, ctx)
    assert isinstance(v, complex)
    assert v == pytest.approx(1.0 / (1.0 + 0.1j))


def test_bulk_longitudinal(ctx):
    assert bulk_longitudinal(1.0, 2.0, ctx) == 0.5


def test_self_energy():
    assert self_energy(1.0, WaveContext()).transverse == 0.0
    s = self_energy(2.0, WaveContext())
    assert s.transverse == -1.0 and s.longitudinal == -1.0
    assert self_energy(2.0, WaveContext(k_tilde=2.0)).transverse == -4.0


def test_dyson_assembly_matches_bulk(ctx):
    assert dyson_transverse(1.7, 2.25, ctx) == pytest.approx(bulk_transverse(1.7, 2.25, ctx),
                                                             rel=1e-12)


def test_vacuum_regulator():
    assert vacuum_regulator(WaveContext(1.0, 1.0, 3.0)) == -1.0
    assert vacuum_regulator(WaveContext(2.0, 1.0, 0.75)) == -1.0
    assert vacuum_regulator(WaveContext(0.3, 1.0, 1e-3)) < 0


def test_residue_integrals():
    for kt, eps in ((1.0, 1.0), (1.0, 2.25), (2.5, 1.7)):
        c = WaveContext(k_tilde=kt)
        ref = -math.sqrt(eps) * kt / (4.0 * math.pi)
        assert transverse_residue_integral(eps, c) == ref
        assert radial_transverse_im_integral(eps, c) == pytest.approx(ref, rel=1e-10)
    assert transverse_residue_integral(1.0, WaveContext()) == pytest.approx(-0.0795775, abs=1e-7)
    assert transverse_residue_integral(2.25, WaveContext()) == pytest.approx(-0.1193662, abs=1e-7)


def test_residue_integral_needs_real_eps(ctx):
    with pytest.raises(DomainError):
        transverse_residue_integral(2.0 + 0.1j, ctx)
    with pytest.raises(DomainError):
        radial_transverse_im_integral(-1.0, ctx)


def test_dyadic_coefficients_far_field():
    a, b = dyadic_coefficients(1e6)
    assert abs(a - 1.0) < 1e-5 and abs(b + 1.0) < 1e-5


def test_dyadic_traces_structure(ctx):
    # far field: the transverse trace falls as 1/r, the longitudinal one faster
    tp, tl = real_space_dyadic_traces(np.array([100.0, 200.0]), ctx)
    assert abs(tp[0]) * 100.0 == pytest.approx(2.0 / (4 * math.pi), rel=1e-3)
    assert abs(tl[1]) < abs(tl[0])
    assert abs(tl[0]) < 0.05 * abs(tp[0])
    # near field: 1/r^3 growth of both traces
    tp1, tl1 = real_space_dyadic_traces(1e-3, ctx)
    tp2, tl2 = real_space_dyadic_traces(2e-3, ctx)
    assert abs(tl1 / tl2) == pytest.approx(8.0, rel=1e-2)
    assert abs(tp1 / tp2) == pytest.approx(8.0, rel=1e-2)


def test_dyadic_traces_reject_origin(ctx):
    with pytest.raises(DomainError):
        real_space_dyadic_traces(0.0, ctx)


def test_context_validation():
    with pytest.raises(DomainError):
        WaveContext(k_tilde=0.0)
    with pytest.raises(DomainError):
        WaveContext(alpha0=math.nan)
    assert WaveContext(2.0, 1.0, 3.0).at(1.5) == WaveContext(2.0, 1.5, 3.0)


def test_medium_validation():
    assert MediumSpec(1.5, 2.0).real_permittivity
    assert not MediumSpec(1.5, 2.0 + 0.1j).real_permittivity
    with pytest.raises(DomainError):
        MediumSpec(1.5 - 0.1j, 1.0)
    with pytest.raises(DomainError):
        MediumSpec(math.inf, 1.0)
