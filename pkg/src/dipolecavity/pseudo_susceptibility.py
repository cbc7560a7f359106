"""Partial pseudo-susceptibilities, their resummation and the 1PI split.

Every state is stored as the ratio ``r(k) = chi(k) / chi0`` with
``chi0 = -kt^2 / Sigma = 1 / (eps - 1)``, which stays finite at ``eps = 1``.
The recursion then reads

    r_n(k) = Sigma [ w_delta G^0(k) r_{n-1}(k) + int d3k'/(2pi)^3 h(|k - k'|) (angular weights) G^0(k') r_{n-1}(k') ]

for each polarization.  The constant large-``k`` limit of ``r_{n-1}`` is
convolved in closed form through the real-space cavity factors; only the
decaying remainder goes through the kernel matrices of the grid.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .cavity_factors import (
    CavityFactorTable,
    correlation_cavity_factor,
    orientation_weights,
    shell_cavity_factor,
    shell_gamma_first_order,
    ball_cavity_factor,
)
from .correlations import CavityGeometry, CorrelationFT
from .errors import (
    DivisionByZero1PI,
    DomainError,
    GeometryError,
    ResummationDiverges,
    ResummationWarning,
)
from .propagators import PropagatorComponents, WaveContext, free_transverse, self_energy
from .spectral import SpectralFunction, SpectralGrid, SpectralPair

RESUM_WARN = 0.9


def _eps_from_sigma(sigma: PropagatorComponents, ctx: WaveContext) -> complex:
    return 1.0 - complex(sigma.transverse) / ctx.k_tilde ** 2


def chi0_value(eps) -> complex:
    """``chi0 = 1 / (eps - 1)``; infinite at ``eps = 1``."""
    d = complex(eps) - 1.0
    return complex(math.inf) if d == 0 else 1.0 / d


@dataclass
class Decomposition:
    """1PI and N1PI parts of a state, both as ratios to ``chi0``."""

    perp_1pi: SpectralFunction
    perp_n1pi: SpectralFunction
    par_1pi: SpectralFunction
    par_n1pi: SpectralFunction


@dataclass
class PseudoChiState:
    """Pseudo-susceptibility of order ``n`` (or a sum of orders) on a spectral grid.

    Attributes
    ----------
    order : int
    ratio_perp, ratio_par : SpectralFunction
        ``chi / chi0`` per polarization.
    chi0 : complex
        ``1 / (eps - 1)``.
    decomposition : Decomposition, optional
    delta_weight : float, optional
        Weight of the constant part of the correlation that produced the state.
    singular : bool
        ``True`` when the state carries an uncancelled ``G^0`` pole at ``kt``.
    """

    order: int
    ratio_perp: SpectralFunction
    ratio_par: SpectralFunction
    chi0: complex
    decomposition: Optional[Decomposition] = None
    delta_weight: Optional[float] = None
    singular: bool = False
    source: Optional[object] = field(default=None, repr=False)

    @property
    def grid(self) -> SpectralGrid:
        return self.ratio_perp.grid

    def _chi(self, ratio: SpectralFunction) -> SpectralFunction:
        if math.isinf(abs(self.chi0)):
            if self.order == 0:
                return ratio.map(lambda v: np.full(np.shape(v), complex(math.inf)))
            # chi_n = chi0 Sigma^n (...) stays finite only for n = 1; the
            # ratio is zero for every n >= 1 when Sigma = 0.
            return ratio * 0.0
        return ratio * self.chi0

    @property
    def chi_perp(self) -> SpectralFunction:
        return self._chi(self.ratio_perp)

    @property
    def chi_par(self) -> SpectralFunction:
        return self._chi(self.ratio_par)


@dataclass
class PseudoPropagator:
    """Pseudo-propagator ``G~ = G0 + G0 T G0`` and T-matrix ``T = N1PI / (1PI G0)``."""

    g_tilde_perp: SpectralFunction
    g_tilde_par: SpectralFunction
    t_matrix_perp: SpectralFunction
    t_matrix_par: SpectralFunction


@dataclass
class ChiPair(SpectralPair):
    """Total pseudo-susceptibility ratios with their first-order piece.

    ``first_order`` is ``r1 = (eps - 1) chi1`` on the same grid,
    ``first_order_gamma`` the exact normalized ``(2 gamma_perp, gamma_par)``
    contributions of ``r1`` and ``remainder`` the ratio minus ``1 + r1``
    evaluated without cancellation.
    """

    chi0: complex = 0j
    first_order: Optional[SpectralPair] = None
    first_order_gamma: Optional[tuple] = None
    remainder: Optional[SpectralPair] = None

    @property
    def chi_perp(self) -> SpectralFunction:
        return self.perp * self.chi0

    @property
    def chi_par(self) -> SpectralFunction:
        return self.par * self.chi0


@dataclass
class FirstOrderPair(SpectralPair):
    """``chi1`` per polarization with the exact γ integrals of ``-kt^2 C`` per unit ``eps - 1``."""

    exact_gamma: Optional[tuple] = None


def _g0_perp(points, ctx):
    with np.errstate(divide="ignore"):
        return free_transverse(points, ctx)


def initial_state(grid: SpectralGrid, eps) -> PseudoChiState:
    """Order-zero state: ``chi0`` for both polarizations, ratio 1."""
    one = SpectralFunction.constant(grid, 1.0)
    return PseudoChiState(0, one, one.map(lambda v: v), chi0_value(eps))


@dataclass
class _Kernels:
    c_perp: np.ndarray
    c_par: np.ndarray
    w_c: np.ndarray
    w_s: np.ndarray
    h0: float


def _kernels(grid: SpectralGrid, corr: CorrelationFT, ctx: WaveContext) -> _Kernels:
    key = ("kernels", corr.kind, corr.terms, ctx.k_tilde)
    if key not in grid._cache:
        pts = grid.all_points
        cp, cl = correlation_cavity_factor(pts, corr, ctx)
        wc, ws = orientation_weights(pts, corr)
        grid._cache[key] = _Kernels(cp, cl, wc, ws, corr.value_at_origin)
    return grid._cache[key]


def chi_step(prev: PseudoChiState, corr: CorrelationFT, sigma: PropagatorComponents,
             ctx: WaveContext) -> PseudoChiState:
    """Advance the recursion by one order.

    Parameters
    ----------
    prev : PseudoChiState
        State of order ``n - 1`` on a :class:`SpectralGrid`.
    corr : CorrelationFT
    sigma : PropagatorComponents
        Effective-medium self-energy (constant in ``k``).
    ctx : WaveContext

    Returns
    -------
    PseudoChiState
        Order ``n``.

    Raises
    ------
    DomainError
        If ``prev`` carries a pole at ``kt`` (bare cavity beyond first order).
    """
    grid = prev.grid
    if grid is None:
        raise DomainError("state is not attached to a spectral grid")
    if prev.singular:
        raise DomainError("cannot convolve a state with an uncancelled pole at k_tilde")
    kt = ctx.k_tilde
    if abs(grid.pole - kt) > 1e-12 * kt:
        raise DomainError("grid pole does not match k_tilde")
    s_perp, s_par = complex(sigma.transverse), complex(sigma.longitudinal)
    pts = grid.all_points
    n = grid.size
    g_par = 1.0 / kt ** 2
    w_delta = corr.delta_weight
    rp, rl = prev.ratio_perp, prev.ratio_par
    l_perp, l_par = rp.limit, rl.limit
    f_perp = rp.all_values - l_perp
    f_par = rl.all_values - l_par

    conv_perp = np.zeros(n + 1, complex)
    conv_par = np.zeros(n + 1, complex)
    if not corr.is_zero:
        ker = _kernels(grid, corr, ctx)
        # constant limits convolved in closed form
        conv_perp += l_perp * (ker.c_perp - 0.5 * g_par * ker.w_s) + l_par * 0.5 * g_par * ker.w_s
        conv_par += l_perp * (ker.c_par - g_par * ker.w_c) + l_par * g_par * ker.w_c
        if np.any(f_perp != 0) or np.any(f_par != 0):
            m0, m2 = grid.moments(corr)
            a, ap, _ = grid.transverse_functional(2.0)
            b, _ = grid.longitudinal_functional(2.0)
            alpha = np.concatenate([a, [ap]]) * f_perp
            beta = np.concatenate([b, [0.0]]) * f_par * g_par
            conv_perp += ((m0 + m2) @ alpha + (m0 - m2) @ beta) / (8.0 * math.pi ** 2)
            conv_par += ((m0 - m2) @ alpha + m2 @ beta) / (4.0 * math.pi ** 2)

    singular = False
    new_perp = s_perp * conv_perp
    new_par = s_par * conv_par
    if w_delta != 0 and s_perp != 0:
        g0 = _g0_perp(pts[:-1], ctx)
        new_perp[:-1] += s_perp * w_delta * g0 * rp.values
        if rp.at_pole != 0:
            new_perp[-1] = complex(math.nan)
            singular = True
    if w_delta != 0:
        new_par += s_par * w_delta * g_par * rl.all_values
    lim_par = s_par * g_par * (w_delta + (0.0 if corr.is_zero else corr.value_at_origin)) * l_par
    return PseudoChiState(
        prev.order + 1,
        SpectralFunction.on_grid(grid, new_perp, 0j),
        SpectralFunction.on_grid(grid, new_par, lim_par),
        prev.chi0,
        delta_weight=w_delta,
        singular=singular,
    )


def chi_states(grid: SpectralGrid, corr: CorrelationFT, eps, ctx: WaveContext,
               n_max: int) -> list:
    """States of orders ``0..n_max`` (stops early at a singular state)."""
    sigma = self_energy(eps, ctx)
    states = [initial_state(grid, eps)]
    for _ in range(n_max):
        if states[-1].singular:
            break
        states.append(chi_step(states[-1], corr, sigma, ctx))
    return states


def molecule_grid(geom: CavityGeometry, ctx: WaveContext, k_max_factor: float = 2000.0,
                  order: int = 10) -> SpectralGrid:
    """Spectral grid adapted to the molecular shell (or the bare cavity)."""
    return SpectralGrid.build(ctx, geom.R0, geom.outer_radius, k_max_factor, order)


def chi_first_order_molecule(geom: CavityGeometry, ctx: WaveContext, tables=None,
                             grid: Optional[SpectralGrid] = None) -> FirstOrderPair:
    """``chi1 = -kt^2 (C^{R0} - C^{R1})`` for the molecular shell.

    Parameters
    ----------
    geom : CavityGeometry
        Molecule geometry (``R1`` required).
    ctx : WaveContext
    tables : pair of CavityFactorTable, optional
        Tables of ``C^{R0}`` and ``C^{R1}``; the result then lives on their
        common abscissas and is interpolated.
    grid : SpectralGrid, optional
        Grid to evaluate on (built from the geometry by default).  Values are
        exact closed forms, so this is the route used for γ integrals.
    """
    if geom.R1 is None:
        raise GeometryError("molecule geometry needs R1")
    kt = ctx.k_tilde
    if tables is not None:
        t0, t1 = tables
        if not np.array_equal(t0.grid, t1.grid):
            raise DomainError("cavity tables must share a grid")
        k = t0.grid
        perp = -kt ** 2 * (t0.c_perp - t1.c_perp)
        par = -kt ** 2 * (t0.c_par - t1.c_par)
        return FirstOrderPair(SpectralFunction(k, perp), SpectralFunction(k, par))
    if grid is None:
        grid = molecule_grid(geom, ctx)
    cp, cl = shell_cavity_factor(grid.all_points, geom, ctx)
    exact = shell_gamma_first_order(geom, ctx)
    # r1 = (eps-1) chi1 and chi1 = -kt^2 C; the exact integrals are those of
    # Sigma C per unit (eps-1), i.e. of chi1 itself.
    return FirstOrderPair(SpectralFunction.on_grid(grid, -kt ** 2 * cp),
                          SpectralFunction.on_grid(grid, -kt ** 2 * cl),
                          exact_gamma=exact)


def chi_first_order_bare(geom: CavityGeometry, ctx: WaveContext,
                         grid: SpectralGrid) -> SpectralPair:
    """Bare-cavity ``chi1 = -kt^2 (G^0 + C^{R0})``; the transverse pole value is ``nan``."""
    kt = ctx.k_tilde
    pts = grid.all_points
    cp, cl = ball_cavity_factor(pts, geom.R0, ctx)
    g0 = np.concatenate([_g0_perp(pts[:-1], ctx), [math.nan]])
    return SpectralPair(SpectralFunction.on_grid(grid, -kt ** 2 * (g0 + cp)),
                        SpectralFunction.on_grid(grid, -kt ** 2 * (1.0 / kt ** 2 + cl), 0j))


def chi_total_small_molecule(chi1: SpectralPair, eps1) -> ChiPair:
    """Uniform-field geometric resummation ``chi = chi0 + chi1 / (1 - chi1/chi0)``.

    Returned as ratios to ``chi0``: ``1 / (1 - r1)`` with ``r1 = (eps1 - 1) chi1``.

    Raises
    ------
    ResummationDiverges
        If ``|r1| >= 1`` anywhere on the grid.
    """
    d = complex(eps1) - 1.0
    r1 = SpectralPair(chi1.perp * d, chi1.par * d)
    worst = max(r1.perp.max_abs(), r1.par.max_abs())
    if worst >= 1.0:
        raise ResummationDiverges(f"|chi1/chi0| reaches {worst:.3g} >= 1")
    if worst > RESUM_WARN:
        warnings.warn(f"|chi1/chi0| reaches {worst:.3g}; resummation converges slowly",
                      ResummationWarning, stacklevel=2)
    perp = r1.perp.map(lambda v: 1.0 / (1.0 - v))
    par = r1.par.map(lambda v: 1.0 / (1.0 - v))
    rest = SpectralPair(r1.perp.map(lambda v: v * v / (1.0 - v)),
                        r1.par.map(lambda v: v * v / (1.0 - v)))
    exact = getattr(chi1, "exact_gamma", None)
    first_gamma = None if exact is None else (d * exact[0], d * exact[1])
    return ChiPair(perp, par, chi0=chi0_value(eps1), first_order=r1, first_order_gamma=first_gamma,
                   remainder=rest)


def decompose_1pi(states: Sequence[PseudoChiState], sigma: PropagatorComponents,
                  ctx: WaveContext) -> PseudoChiState:
    """Sum consecutive orders and split the sum into 1PI and N1PI parts.

    ``N1PI(n) = w_delta r_{n-1} Sigma G^0`` for ``n >= 1`` and ``N1PI(0) = 0``;
    only the constant (delta) part of the correlation can cut a diagram at a
    single free propagator.
    """
    if not states:
        raise DomainError("need at least one state")
    for i, st in enumerate(states):
        if st.order != i:
            raise DomainError("states must be consecutive orders starting at 0")
    grid = states[0].grid
    pts = grid.all_points
    g0 = np.concatenate([_g0_perp(pts[:-1], ctx), [complex(math.inf)]])
    g_par = 1.0 / ctx.k_tilde ** 2
    s_perp, s_par = complex(sigma.transverse), complex(sigma.longitudinal)
    tot_p = sum((s.ratio_perp for s in states[1:]), states[0].ratio_perp)
    tot_l = sum((s.ratio_par for s in states[1:]), states[0].ratio_par)
    zero = SpectralFunction.constant(grid, 0.0)
    n1_p, n1_l = zero, zero
    for prev, cur in zip(states[:-1], states[1:]):
        w = cur.delta_weight or 0.0
        if w == 0 or (s_perp == 0 and s_par == 0):
            continue
        with np.errstate(invalid="ignore"):
            vp = w * s_perp * g0 * prev.ratio_perp.all_values
        vp[-1] = complex(math.nan) if prev.ratio_perp.at_pole != 0 else 0j
        n1_p = n1_p + SpectralFunction.on_grid(grid, vp, 0j)
        n1_l = n1_l + prev.ratio_par * (w * s_par * g_par)
    dec = Decomposition(tot_p - n1_p, n1_p, tot_l - n1_l, n1_l)
    return PseudoChiState(states[-1].order, tot_p, tot_l, states[0].chi0, dec,
                          states[-1].delta_weight, any(s.singular for s in states))


def pseudo_propagator(decomposed: PseudoChiState, sigma: PropagatorComponents,
                      ctx: WaveContext) -> PseudoPropagator:
    """T-matrix ``T = N1PI / (1PI G0)`` and ``G~ = G0 + G0 T G0`` on the grid.

    This ``T`` makes ``chi^1PI G~ = chi G0`` hold pointwise for any number of
    orders.  For the fully resummed series ``N1PI = chi Sigma G0`` and ``T``
    becomes the familiar ``Sigma / (1 - Sigma G0)``; ``sigma`` only enters
    through the decomposition and is accepted for symmetry with it.

    Raises
    ------
    DivisionByZero1PI
        If the 1PI part vanishes at a grid point where N1PI does not.
    """
    dec = decomposed.decomposition
    if dec is None:
        raise DomainError("state has no 1PI decomposition")
    grid = decomposed.grid
    pts = grid.all_points
    g0p = np.concatenate([_g0_perp(pts[:-1], ctx), [complex(math.inf)]])
    g0l = np.full(pts.shape, 1.0 / ctx.k_tilde ** 2, complex)
    out = []
    for one, n1, g0 in ((dec.perp_1pi, dec.perp_n1pi, g0p), (dec.par_1pi, dec.par_n1pi, g0l)):
        a = one.all_values
        b = n1.all_values
        bad = (a == 0) & (b != 0)
        if np.any(bad):
            i = int(np.nonzero(bad)[0][0])
            raise DivisionByZero1PI(f"1PI part vanishes at k = {pts[i]:.6g}")
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(b == 0, 0j, b / (np.where(a == 0, 1.0, a) * g0))
            gt = np.where(t == 0, g0, g0 + g0 * t * g0)
        out.append((SpectralFunction.on_grid(grid, gt), SpectralFunction.on_grid(grid, t)))
    (gp, tp), (gl, tl) = out
    return PseudoPropagator(gp, gl, tp, tl)


def decompose_resummed(pair: ChiPair, delta_weight: float = 0.0) -> PseudoChiState:
    """Wrap a resummed shell ratio as a state with an all-1PI decomposition.

    The shell correlation has no constant part, so nothing in the resummed
    series is reducible.
    """
    if delta_weight != 0:
        raise DomainError("only correlations without a constant part resum to pure 1PI")
    zero = SpectralFunction.constant(pair.perp.grid, 0.0)
    dec = Decomposition(pair.perp, zero, pair.par, zero)
    return PseudoChiState(0, pair.perp, pair.par, pair.chi0, dec, 0.0, source=pair)
