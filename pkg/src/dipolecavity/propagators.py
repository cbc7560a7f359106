"""Free and bulk dyadic propagators, self-energy and regulator.

k-space conventions (all with the outgoing-wave ``+i0``)::

    G_perp^0(k) = 1 / (kt^2 - k^2)          G_par^0 = +1 / kt^2
    G_perp(k)   = 1 / (eps kt^2 - k^2)      G_par   = +1 / (eps kt^2)
    Sigma       = -kt^2 (eps - 1)           G = G^0 / (1 - Sigma G^0)

where ``kt`` is the operating wavenumber.  The longitudinal sign is the one
that reproduces the electrostatic near-field limit (see the decisions log).
In real space the same dyadic reads, for ``r > 0``,
``-(exp(i x) / (4 pi r)) (a I + b rr)`` with ``x = kt r``,
``a = 1 + i/x - 1/x^2`` and ``b = -1 - 3i/x + 3/x^2``, plus the contact term
``+delta(r) I / (3 kt^2)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError


@dataclass(frozen=True)
class WaveContext:
    """Wavenumbers and polarizability of one evaluation.

    Parameters
    ----------
    k0 : float
        In-vacuum resonance wavenumber.
    k_tilde : float
        Operating wavenumber at which the propagators are evaluated.
    alpha0 : float
        Electrostatic polarizability volume.
    """

    k0: float = 1.0
    k_tilde: float = 1.0
    alpha0: float = 1.0

    def __post_init__(self):
        for name in ("k0", "k_tilde", "alpha0"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise DomainError(f"{name} must be positive and finite, got {v!r}")

    def at(self, k_tilde: float) -> "WaveContext":
        """Copy with a different operating wavenumber."""
        return WaveContext(self.k0, float(k_tilde), self.alpha0)


@dataclass(frozen=True)
class MediumSpec:
    """Relative permittivities inside the molecule (``eps1``) and of the host (``eps2``)."""

    eps1: complex = 1.0
    eps2: complex = 1.0

    def __post_init__(self):
        for name in ("eps1", "eps2"):
            v = complex(getattr(self, name))
            if not (np.isfinite(v.real) and np.isfinite(v.imag)):
                raise DomainError(f"{name} must be finite")
            if v.imag < 0:
                raise DomainError(f"{name} must be passive (Im >= 0), got {v!r}")

    @property
    def real_permittivity(self) -> bool:
        return complex(self.eps1).imag == 0 and complex(self.eps2).imag == 0


@dataclass(frozen=True)
class PropagatorComponents:
    """Transverse and longitudinal components at one wavenumber."""

    transverse: complex
    longitudinal: complex


def free_transverse(k, ctx: WaveContext):
    """Free transverse propagator ``1/(kt^2 - k^2)``; the pole at ``k = kt`` is left to the integrators."""
    k = np.asarray(k, dtype=float)
    if np.any(k < 0):
        raise DomainError("k must be non-negative")
    with np.errstate(divide="ignore"):
        out = 1.0 / (ctx.k_tilde ** 2 - k ** 2)
    return out if out.ndim else float(out)


def free_longitudinal(k, ctx: WaveContext):
    """Free longitudinal propagator, the constant ``+1/kt^2``."""
    k = np.asarray(k, dtype=float)
    out = np.full(k.shape, 1.0 / ctx.k_tilde ** 2)
    return out if out.ndim else float(out)


def bulk_transverse(k, eps, ctx: WaveContext):
    """Bulk transverse propagator ``1/(eps kt^2 - k^2)``."""
    k = np.asarray(k, dtype=float)
    eps = complex(eps)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.asarray(1.0 / (eps * ctx.k_tilde ** 2 - k ** 2))
    if eps.imag == 0:
        out = out.real
    return out if out.ndim else out.item()


def bulk_longitudinal(k, eps, ctx: WaveContext):
    """Bulk longitudinal propagator ``1/(eps kt^2)``."""
    k = np.asarray(k, dtype=float)
    val = 1.0 / (complex(eps) * ctx.k_tilde ** 2)
    if complex(eps).imag == 0:
        val = val.real
    out = np.full(k.shape, val)
    return out if out.ndim else out.item()


def self_energy(eps, ctx: WaveContext) -> PropagatorComponents:
    """Effective-medium self-energy ``Sigma = -kt^2 (eps - 1)`` for both polarizations."""
    s = -ctx.k_tilde ** 2 * (complex(eps) - 1.0)
    if s.imag == 0:
        s = s.real
    return PropagatorComponents(s, s)


def dyson_transverse(k, eps, ctx: WaveContext):
    """Bulk transverse propagator assembled as ``G0 / (1 - Sigma G0)``."""
    g0 = free_transverse(k, ctx)
    sigma = self_energy(eps, ctx).transverse
    return g0 / (1.0 - sigma * g0)


def dyadic_coefficients(x):
    """Near/far-field coefficients ``a(x), b(x)`` of the real-space dyadic."""
    x = np.asarray(x, dtype=float)
    a = 1.0 + 1j / x - 1.0 / x ** 2
    b = -1.0 - 3j / x + 3.0 / x ** 2
    return a, b


def real_space_dyadic_traces(r, ctx: WaveContext):
    """Projected traces of the free dyadic at separation ``r > 0``.

    The dyadic is ``A(r) I + B(r) rr`` with
    ``A = -exp(i x) a(x) / (4 pi r)`` and ``B = -exp(i x) b(x) / (4 pi r)``.

    Returns
    -------
    trace_transverse_projected : complex
        ``Tr{G (I - rr)} = 2 A``.
    trace_longitudinal_projected : complex
        ``Tr{G rr} = A + B``.
    """
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise DomainError("r must be positive")
    x = ctx.k_tilde * r
    a, b = dyadic_coefficients(x)
    pref = -np.exp(1j * x) / (4.0 * math.pi * r)
    A = pref * a
    B = pref * b
    t_perp, t_par = 2.0 * A, A + B
    if t_perp.ndim == 0:
        return complex(t_perp), complex(t_par)
    return t_perp, t_par


def vacuum_regulator(ctx: WaveContext) -> float:
    """Regulator ``-3/(k0^2 alpha0)`` standing in for the divergent free-space real part."""
    return -3.0 / (ctx.k0 ** 2 * ctx.alpha0)


def transverse_residue_integral(eps, ctx: WaveContext) -> float:
    """Closed form of ``(1/2pi^2) int k^2 Im G_perp(k) dk = -sqrt(eps) kt / (4 pi)`` for real ``eps > 0``."""
    e = complex(eps)
    if e.imag != 0 or e.real <= 0:
        raise DomainError("closed form needs real positive eps")
    return -math.sqrt(e.real) * ctx.k_tilde / (4.0 * math.pi)


def radial_transverse_im_integral(eps, ctx: WaveContext, rel_tol: float = 1e-10) -> float:
    """``(1/2pi^2) int_0^inf k^2 Im{1/(eps kt^2 - k^2 + i0)} dk`` done by quadrature.

    The integrand is written as ``phi(k) / (k - q - i0)`` with
    ``q = sqrt(eps) kt`` and ``phi(k) = -k^2 / (k + q)``; its imaginary part
    is pure Plemelj, so the principal value runs over a finite window and
    only the delta term survives in the imaginary part.
    """
    from .numerics import integrate_with_pole

    e = complex(eps)
    if e.imag != 0 or e.real <= 0:
        raise DomainError("needs real positive eps")
    q = math.sqrt(e.real) * ctx.k_tilde
    res = integrate_with_pole(None, q, lambda k: -k * k / (k + q), 0.0, 2.0 * q,
                              sign_prescription="-i0", rel_tol=rel_tol)
    return res.value.imag / (2.0 * math.pi ** 2)
