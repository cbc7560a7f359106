"""Radiative correction factors 2γ⊥ and γ∥ from pseudo-susceptibilities.

All values are normalized as ``(2 pi / kt) * gamma``, so the free-space
transverse term is ``-i``.  The divergent free-space real parts are replaced
by the polarizability regulator, which cancels in the resonance condition;
the stored values therefore carry only the imaginary vacuum term and the
cavity corrections.

Transverse integrals over ``k`` take the ``k = kt`` pole as a principal value
plus the outgoing-wave delta term ``-i f(kt)``.  The delta term is the
propagating (P) part; everything else is non-propagating (NP).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .correlations import SHELL, CavityGeometry, CorrelationFT
from .errors import DomainError, NonConvergence
from .numerics import SeriesControl, sum_series
from .propagators import PropagatorComponents, WaveContext, self_energy
from .pseudo_susceptibility import (
    ChiPair,
    PseudoChiState,
    PseudoPropagator,
    chi_step,
    initial_state,
)
from .spectral import SpectralFunction, SpectralGrid, SpectralPair

VACUUM_TWO_GAMMA_PERP = -1j


@dataclass
class GammaFactors:
    """Normalized radiative factors at one operating wavenumber.

    Attributes
    ----------
    two_gamma_perp, gamma_par : complex
    gamma_P : complex
        Propagating part ``2 gamma^P`` (purely imaginary).
    gamma_NP : complex
        Non-propagating part ``gamma^NP``.
    two_gamma_perp_pole : complex
        Full delta-term contribution ``-i chi(kt)/chi0`` of the transverse integral.
    k_tilde : float
    diagnostics : dict
    """

    two_gamma_perp: complex
    gamma_par: complex
    gamma_P: complex = 0j
    gamma_NP: complex = 0j
    two_gamma_perp_pole: complex = -1j
    k_tilde: float = 1.0
    diagnostics: dict = field(default_factory=dict)

    @property
    def total(self) -> complex:
        """``2 gamma_perp + gamma_par``."""
        return self.two_gamma_perp + self.gamma_par

    def physical(self) -> tuple:
        """Unnormalized ``(2 gamma_perp, gamma_par)`` without the regulator."""
        s = self.k_tilde / (2.0 * math.pi)
        return s * self.two_gamma_perp, s * self.gamma_par


def vacuum_gamma(ctx: WaveContext) -> GammaFactors:
    """Free-space values: ``2 gamma_perp = -i``, ``gamma_par = 0``."""
    return GammaFactors(-1j, 0j, -1j, 0j, -1j, ctx.k_tilde, {"method": "vacuum"})


def _assemble(grid: SpectralGrid, perp: SpectralFunction, par: SpectralFunction,
              ctx: WaveContext, first_order: Optional[SpectralPair],
              first_gamma: Optional[tuple], method: str,
              remainder: Optional[SpectralPair] = None) -> GammaFactors:
    """Integrate ratio functions against the free propagators.

    With a first-order piece ``r1`` whose integrals are known exactly, only
    ``ratio - 1 - r1`` is integrated on the grid; ``remainder`` supplies that
    difference directly when it is known in a cancellation-free form.
    """
    if grid is None:
        raise DomainError("ratio functions must live on a spectral grid")
    if abs(grid.pole - ctx.k_tilde) > 1e-12 * ctx.k_tilde:
        raise DomainError("grid pole does not match k_tilde")
    if not np.isfinite(perp.at_pole):
        raise DomainError("transverse ratio is singular at k_tilde")
    rest_p = perp - 1.0
    rest_l = par - par.limit
    exact_p = exact_l = 0j
    if first_order is not None and first_gamma is not None:
        rest_p = rest_p - first_order.perp
        rest_l = rest_l - (first_order.par - first_order.par.limit)
        exact_p, exact_l = first_gamma
        if remainder is not None:
            rest_p, rest_l = remainder.perp, remainder.par - remainder.par.limit
    dp, err_p = grid.normalized_perp(rest_p.values, rest_p.at_pole)
    dl, err_l = grid.normalized_par(rest_l.values)
    two_perp = VACUUM_TWO_GAMMA_PERP + exact_p + dp
    gamma_par = exact_l + dl
    pole = grid.perp_delta_part(perp.at_pole)
    g_p = -1j * perp.at_pole.real
    # principal-value part of the transverse integral of Im(ratio)
    pv_im = two_perp.imag + perp.at_pole.real
    g_np = gamma_par + 1j * pv_im
    diag = {"method": method, "quad_err_perp": err_p, "quad_err_par": err_l,
            "limit_par": complex(par.limit), "grid_size": grid.size}
    if abs(par.limit - 1.0) > 1e-12 and first_order is None:
        diag["note"] = "gamma_par excludes the contact term of a constant limit != 1"
    return GammaFactors(complex(two_perp), complex(gamma_par), complex(g_p), complex(g_np),
                        complex(pole), ctx.k_tilde, diag)


def gamma_closed_form(chi_total_ratio: SpectralPair, ctx: WaveContext) -> GammaFactors:
    """``2 gamma_perp = 2 int (chi/chi0) G_perp^0`` and ``gamma_par = int (chi/chi0) G_par^0``.

    Parameters
    ----------
    chi_total_ratio : SpectralPair or ChiPair
        Ratios ``chi / chi0`` on a :class:`SpectralGrid`.  A :class:`ChiPair`
        with a first-order piece lets that piece be integrated exactly.
    ctx : WaveContext
    """
    first = getattr(chi_total_ratio, "first_order", None)
    first_gamma = getattr(chi_total_ratio, "first_order_gamma", None)
    perp, par = chi_total_ratio.perp, chi_total_ratio.par
    rest = getattr(chi_total_ratio, "remainder", None)
    return _assemble(perp.grid, perp, par, ctx, first, first_gamma, "closed-form", rest)


def gamma_1pi_form(decomposed: PseudoChiState, pseudo: PseudoPropagator,
                   ctx: WaveContext) -> GammaFactors:
    """``2 gamma_perp = 2 int (chi^1PI/chi0) G~_perp`` with the pseudo-propagator.

    The integrand is written as ``(chi^1PI/chi0) (G~/G0)`` against ``G0``; a
    non-zero T-matrix at ``kt`` would move the pole off the grid and is
    rejected.
    """
    dec = decomposed.decomposition
    if dec is None:
        raise DomainError("state has no 1PI decomposition")
    grid = decomposed.grid
    t_p, t_l = pseudo.t_matrix_perp, pseudo.t_matrix_par
    if t_p.at_pole != 0:
        raise DomainError("T-matrix does not vanish at k_tilde; pole lies off the grid")
    pts = grid.all_points
    with np.errstate(divide="ignore", invalid="ignore"):
        g0 = 1.0 / (ctx.k_tilde ** 2 - pts[:-1] ** 2)
    fac_p = np.concatenate([1.0 + t_p.values * g0, [1.0]])
    fac_l = 1.0 + t_l.all_values / ctx.k_tilde ** 2
    perp = SpectralFunction.on_grid(grid, dec.perp_1pi.all_values * fac_p, dec.perp_1pi.limit)
    par = SpectralFunction.on_grid(grid, dec.par_1pi.all_values * fac_l,
                                   dec.par_1pi.limit * (1.0 + t_l.limit / ctx.k_tilde ** 2))
    source = getattr(decomposed, "source", None)
    first = getattr(source, "first_order", None)
    first_gamma = getattr(source, "first_order_gamma", None)
    rest = None
    src_rest = getattr(source, "remainder", None)
    if src_rest is not None and not np.any(t_p.all_values) and not np.any(t_l.all_values):
        rest = src_rest
    return _assemble(grid, perp, par, ctx, first, first_gamma, "1pi-form", rest)


def split_p_np(decomposed: PseudoChiState, pseudo: PseudoPropagator, ctx: WaveContext):
    """Propagating and non-propagating parts ``(2 gamma^P, gamma^NP)``.

    ``2 gamma^P`` collects the delta term of ``Im G~_perp`` weighted by
    ``Re(chi^1PI/chi0)``; ``gamma^NP`` is ``gamma_par`` plus the principal
    value of ``Im(chi^1PI/chi0) Re G~_perp``.
    """
    g = gamma_1pi_form(decomposed, pseudo, ctx)
    return g.gamma_P, g.gamma_NP


# ---------------------------------------------------------------------------
# Series representations
# ---------------------------------------------------------------------------

class ChiSeries:
    """Lazily extended list of recursion states for one correlation and medium."""

    def __init__(self, grid: SpectralGrid, corr: CorrelationFT, eps, ctx: WaveContext):
        self.grid = grid
        self.corr = corr
        self.eps = complex(eps)
        self.ctx = ctx
        self.sigma = self_energy(eps, ctx)
        self._states = [initial_state(grid, eps)]

    def __getitem__(self, n: int) -> PseudoChiState:
        while len(self._states) <= n:
            self._states.append(chi_step(self._states[-1], self.corr, self.sigma, self.ctx))
        return self._states[n]

    def __len__(self) -> int:
        return len(self._states)


def _first_order_exact(states, ctx: WaveContext):
    corr = getattr(states, "corr", None)
    if corr is None or corr.kind != SHELL or corr.geometry is None:
        return None
    from .cavity_factors import shell_gamma_first_order

    d = -complex(states.sigma.transverse) / ctx.k_tilde ** 2
    e_p, e_l = shell_gamma_first_order(corr.geometry, ctx)
    return d * e_p, d * e_l


def _check_series_input(states):
    st1 = states[1] if len(states) > 1 or isinstance(states, ChiSeries) else None
    if st1 is not None and st1.delta_weight not in (None, 0.0):
        raise DomainError("series representations need a correlation without a constant part")


def _series(states, ctx, control, term):
    _check_series_input(states)
    control = control or SeriesControl(rel_tol=1e-10, max_terms=40)
    cache = {}

    def gen(n):
        if n == 0:
            cache[0] = (VACUUM_TWO_GAMMA_PERP, 0j, 0.0)
        else:
            if not isinstance(states, ChiSeries) and n >= len(states):
                cache[n] = (0j, 0j, 0.0)
            else:
                cache[n] = term(n)
        tp, tl, _ = cache[n]
        return tp + tl

    _, used = sum_series(gen, control)
    two_perp = sum(cache[n][0] for n in range(used))
    par = sum(cache[n][1] for n in range(used))
    err = sum(cache[n][2] for n in range(used))
    return complex(two_perp), complex(par), used, err


def _series_terms_common(states, ctx):
    grid = states[0].grid
    exact = _first_order_exact(states, ctx)
    if exact is None:
        raise DomainError("series need the exact first-order shell terms (use ChiSeries "
                          "with a shell correlation)")
    return grid, exact


def gamma_series_a(chi_states, sigma: PropagatorComponents, ctx: WaveContext,
                   control: Optional[SeriesControl] = None) -> GammaFactors:
    """Series (a): ``sum_n 2 int chi_n Sigma G^0`` term by term.

    The longitudinal terms are integrated after exchanging the order of the
    convolution and the outer integral, so each order only needs the
    previous state weighted by the ``cos^2``/``sin^2`` volume factors.
    """
    grid, exact = _series_terms_common(chi_states, ctx)
    g_par = 1.0 / ctx.k_tilde ** 2
    s_par = complex(sigma.longitudinal)
    corr = chi_states.corr
    from .cavity_factors import orientation_weights

    pts = grid.all_points
    wc, ws = orientation_weights(pts, corr)

    def term(n):
        if n == 1:
            return exact[0], exact[1], 0.0
        st = chi_states[n]
        prev = chi_states[n - 1]
        tp, ep = grid.normalized_perp(st.ratio_perp.values, st.ratio_perp.at_pole)
        fp = prev.ratio_perp.all_values * ws
        fl = prev.ratio_par.all_values * wc
        a, ea = grid.normalized_perp(fp[:-1], fp[-1])
        b, eb = grid.normalized_par(fl[:-1])
        tl = s_par * g_par * (0.5 * a + b)
        return tp, tl, ep + abs(s_par * g_par) * (ea + eb)

    tp, tl, used, err = _series(chi_states, ctx, control, term)
    return GammaFactors(tp, tl, -1j, 0j, -1j, ctx.k_tilde,
                        {"method": "series-a", "terms": used, "quad_err": err})


def gamma_series_b(chi_states, sigma: PropagatorComponents, ctx: WaveContext,
                   control: Optional[SeriesControl] = None) -> GammaFactors:
    """Series (b): ``sum_n 2 int chi_{n-1} Sigma G^0 Sigma chi_1`` term by term."""
    grid, exact = _series_terms_common(chi_states, ctx)

    def term(n):
        if n == 1:
            return exact[0], exact[1], 0.0
        prev = chi_states[n - 1]
        first = chi_states[1]
        fp = prev.ratio_perp * first.ratio_perp
        fl = prev.ratio_par * first.ratio_par
        tp, ep = grid.normalized_perp(fp.values, fp.at_pole)
        tl, el = grid.normalized_par(fl.values)
        return tp, tl, ep + el

    tp, tl, used, err = _series(chi_states, ctx, control, term)
    return GammaFactors(tp, tl, -1j, 0j, -1j, ctx.k_tilde,
                        {"method": "series-b", "terms": used, "quad_err": err})
