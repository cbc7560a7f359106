"""Resonance condition, decay rates and the three emitter scenarios.

Scenarios:

* bare cavity: the emitter sits in an empty ball of radius ``R0`` drilled in
  a host of permittivity ``eps2``;
* molecule in vacuum: the emitter sits at the centre of a molecule, a shell
  ``R0 < r < R1`` of permittivity ``eps1``;
* molecule in medium: the same molecule embedded in a host ``eps2``.

Rates are returned over the in-vacuum rate ``Gamma0 = c alpha0 k0^4 / 6 pi``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import constants
from scipy.optimize import brentq

from .cavity_factors import ball_cavity_factor, shell_cavity_factor
from .correlations import CavityGeometry
from .errors import (
    DomainError,
    FixedPointNotConverging,
    IllConditionedFit,
    MultipleRootsWarning,
    NegativeRate,
    NoSignChange,
)
from .gamma_factors import GammaFactors, gamma_closed_form, vacuum_gamma
from .propagators import MediumSpec, WaveContext, radial_transverse_im_integral, transverse_residue_integral
from .pseudo_susceptibility import (
    chi_first_order_molecule,
    chi_total_small_molecule,
    molecule_grid,
)

FULL_PIPELINE = "full-pipeline"
PAPER_EXPANSION = "paper-expansion"

FIXED_POINT_MAX_ITER = 20
FIXED_POINT_TOL = 1e-10
FIXED_POINT_DAMPING = 0.5
DEFAULT_K_MAX_FACTOR = 2000.0

# Leading transverse coefficients of the (eps1 - 1) expansion.
PERP_ORDER1 = {"inverse": 0.5j, "quadratic": 11.0 / 30.0, "cubic": 2.0j / 9.0,
               "quartic": -23.0 / 210.0}
PERP_ORDER2 = {"quadratic_squared": 121.0 / 900.0}
# Near-field coefficients (A3, B3, A1, B1) per order of (eps1 - 1).
PAR_TABLE = {
    1: (1.0, -1.0, 0.5, -0.5),
    2: (-2.0 / 3.0, 2.0, 0.0, 4.0 / 3.0),
}


@dataclass(frozen=True)
class EmitterSpec:
    """Two-level emitter: resonance ``k0`` and polarizability volume ``alpha0``.

    Attributes
    ----------
    k0 : float
    alpha0 : float
    c : float
        Speed of light, only used to express ``Gamma0`` in absolute units.
    """

    k0: float = 1.0
    alpha0: float = 1e-3
    c: float = constants.c

    def __post_init__(self):
        for name in ("k0", "alpha0", "c"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise DomainError(f"{name} must be positive and finite, got {v!r}")

    @classmethod
    def from_dipole(cls, mu: float, k0: float, eps0: float = constants.epsilon_0,
                    hbar: float = constants.hbar, c: float = constants.c) -> "EmitterSpec":
        """``alpha0 = 2 |mu|^2 / (eps0 hbar c k0)``."""
        return cls(k0, 2.0 * abs(mu) ** 2 / (eps0 * hbar * c * k0), c)

    @property
    def gamma0(self) -> float:
        """In-vacuum decay rate ``c alpha0 k0^4 / (6 pi)``."""
        return self.c * self.alpha0 * self.k0 ** 4 / (6.0 * math.pi)

    def context(self, k_tilde: Optional[float] = None) -> WaveContext:
        return WaveContext(self.k0, self.k0 if k_tilde is None else k_tilde, self.alpha0)


@dataclass
class EmissionResult:
    """Outcome of one scenario evaluation.

    ``Gamma_total_over_Gamma0`` is ``nan`` when only the propagating part is
    available (embedded scenarios).
    """

    k_res: float
    alpha0_prime: float
    gamma: Optional[GammaFactors]
    Gamma_total_over_Gamma0: float
    Gamma_P_over_Gamma0: float
    root_diagnostics: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# Resonance and rates
# ---------------------------------------------------------------------------

def resonance_residual(spec: EmitterSpec, gamma: GammaFactors, k_tilde: float) -> float:
    """``(k/k0)^2 - 1 - alpha0 k^2 Re{2 gamma_perp + gamma_par} / 3`` (regulator cancelled)."""
    re_phys = k_tilde / (2.0 * math.pi) * gamma.total.real
    return (k_tilde / spec.k0) ** 2 - 1.0 - spec.alpha0 * k_tilde ** 2 * re_phys / 3.0


def solve_resonance(spec: EmitterSpec, gamma_of_k: Callable[[float], GammaFactors],
                    bracket: Sequence[float], n_scan: int = 64, info: Optional[dict] = None) -> float:
    """Smallest root of the resonance condition inside ``bracket``.

    Raises
    ------
    NoSignChange
        If the residual keeps its sign over the 64-point scan.
    """
    lo, hi = float(bracket[0]), float(bracket[1])
    if not (0 <= lo < hi):
        raise DomainError("bracket must satisfy 0 <= lo < hi")

    def f(k):
        return resonance_residual(spec, gamma_of_k(k), k)

    xs = np.linspace(lo, hi, n_scan)
    if xs[0] == 0:
        xs[0] = 1e-12 * hi
    fs = np.array([f(x) for x in xs])
    exact = np.nonzero(fs == 0)[0]
    changes = np.nonzero(np.sign(fs[:-1]) * np.sign(fs[1:]) < 0)[0]
    n_roots = len(changes) + len(exact)
    if n_roots == 0:
        raise NoSignChange(f"resonance residual keeps its sign on [{lo}, {hi}]")
    if n_roots > 1:
        warnings.warn(f"{n_roots} roots of the resonance condition in the bracket; "
                      "returning the smallest", MultipleRootsWarning, stacklevel=2)
    first_change = xs[changes[0]] if len(changes) else math.inf
    first_exact = xs[exact[0]] if len(exact) else math.inf
    if first_exact <= first_change:
        root = float(first_exact)
    else:
        i = changes[0]
        root = brentq(f, xs[i], xs[i + 1], xtol=1e-15 * xs[i + 1], rtol=4.0 * np.finfo(float).eps,
                      maxiter=200)
    res = f(root)
    if abs(res) > 1e-10 * max(1.0, abs(fs[0])):
        raise NoSignChange(f"root polish failed, residual {res:.3g}")
    if info is not None:
        info.update({"bracket": (lo, hi), "residual": res, "roots_found": n_roots})
    return root


def decay_rate(spec: EmitterSpec, gamma: GammaFactors, k_res: float) -> float:
    """``Gamma / Gamma0 = -(k_res/k0)^2 Im{2 gamma_perp + gamma_par}`` (normalized γ).

    Raises
    ------
    NegativeRate
        If the rate comes out negative beyond rounding.
    """
    rate = -(k_res / spec.k0) ** 2 * gamma.total.imag
    if rate < -1e-12:
        raise NegativeRate(f"negative decay rate {rate:.6g}")
    return max(rate, 0.0) if rate < 0 else rate


# ---------------------------------------------------------------------------
# Molecule in vacuum
# ---------------------------------------------------------------------------

def _paper_expansion_gamma(geom: CavityGeometry, eps1, ctx: WaveContext) -> GammaFactors:
    kt = ctx.k_tilde
    x0, x1 = kt * geom.R0, kt * geom.R1
    d = complex(eps1) - 1.0

    def diff(p):
        return x1 ** p - x0 ** p

    b1 = (PERP_ORDER1["inverse"] * (1.0 / x1 - 1.0 / x0) + PERP_ORDER1["quadratic"] * diff(2)
          + PERP_ORDER1["cubic"] * diff(3) + PERP_ORDER1["quartic"] * diff(4))
    b2 = PERP_ORDER2["quadratic_squared"] * diff(2) ** 2
    two_perp = -1j - 1j * d * b1 - 1j * d ** 2 * b2
    par = 0j
    for n, (a3, b3, a1, b1n) in PAR_TABLE.items():
        par += d ** n * (a3 / x1 ** 3 + b3 / x0 ** 3 + a1 / x1 + b1n / x0)
    return GammaFactors(two_perp, par, 0j, 0j, complex("nan"), kt,
                        {"method": PAPER_EXPANSION})


def molecule_in_vacuum_gamma(geom: CavityGeometry, eps1, ctx: WaveContext,
                             method: str = FULL_PIPELINE,
                             k_max_factor: float = DEFAULT_K_MAX_FACTOR) -> GammaFactors:
    """γ factors of an emitter at the centre of a molecule in vacuum.

    Parameters
    ----------
    geom : CavityGeometry
        ``R0`` (emitter cavity) and ``R1`` (molecule).
    eps1 : complex
        Permittivity of the molecular shell.
    ctx : WaveContext
    method : {"full-pipeline", "paper-expansion"}
        Resummed pseudo-susceptibility integrated on a spectral grid, or the
        closed-form expansion in ``eps1 - 1`` and ``kt R``.
    """
    if geom.R1 is None:
        raise DomainError("molecule scenario needs R1")
    geom.check_small_molecule(ctx.k_tilde)
    if complex(eps1) == 1.0 or geom.R1 == geom.R0:
        g = vacuum_gamma(ctx)
        g.diagnostics["method"] = method
        return g
    if method == PAPER_EXPANSION:
        return _paper_expansion_gamma(geom, eps1, ctx)
    if method != FULL_PIPELINE:
        raise DomainError(f"unknown method {method!r}")
    grid = molecule_grid(geom, ctx, k_max_factor)
    chi1 = chi_first_order_molecule(geom, ctx, grid=grid)
    pair = chi_total_small_molecule(chi1, eps1)
    return gamma_closed_form(pair, ctx)


def _self_consistent_k(spec: EmitterSpec, gamma_at: Callable[[WaveContext], GammaFactors]):
    """Fixed point of the resonance condition, ``k = (1/k0^2 - alpha0 c(k)/3)^(-1/2)``."""
    k = spec.k0
    history = []
    damping = 1.0
    g = gamma_at(spec.context(k))
    for it in range(1, FIXED_POINT_MAX_ITER + 1):
        re_phys = k / (2.0 * math.pi) * g.total.real
        denom = 1.0 / spec.k0 ** 2 - spec.alpha0 * re_phys / 3.0
        if denom <= 0:
            raise FixedPointNotConverging("resonance condition has no real root near k0")
        k_new = 1.0 / math.sqrt(denom)
        step = k_new - k
        if len(history) >= 2 and step * history[-1] < 0 and abs(step) >= abs(history[-1]):
            damping = FIXED_POINT_DAMPING
        k_next = k + damping * step
        history.append(step)
        if abs(step) <= FIXED_POINT_TOL * k:
            return k, g, {"iterations": it, "residual": resonance_residual(spec, g, k),
                          "damping": damping}
        k = k_next
        g = gamma_at(spec.context(k))
    raise FixedPointNotConverging(f"no convergence in {FIXED_POINT_MAX_ITER} iterations")


def molecule_in_vacuum_emission(geom: CavityGeometry, eps1, spec: EmitterSpec,
                                method: str = FULL_PIPELINE,
                                k_max_factor: float = DEFAULT_K_MAX_FACTOR) -> EmissionResult:
    """Self-consistent resonance and total rate for the molecule-in-vacuum scenario."""
    k_res, g, diag = _self_consistent_k(
        spec, lambda ctx: molecule_in_vacuum_gamma(geom, eps1, ctx, method, k_max_factor))
    rate = decay_rate(spec, g, k_res)
    rate_p = -(k_res / spec.k0) ** 2 * g.gamma_P.imag if method == FULL_PIPELINE else math.nan
    return EmissionResult(k_res, spec.alpha0 * (spec.k0 / k_res) ** 2, g, rate, rate_p, diag)


# ---------------------------------------------------------------------------
# Embedded scenarios
# ---------------------------------------------------------------------------

def ll_factor(eps2: float) -> float:
    """Point-emitter propagating rate ``((eps2+2)/3)^2 sqrt(eps2) - (eps2-1)/3``."""
    e = float(eps2)
    if e < 1:
        raise DomainError("eps2 must be >= 1")
    return ((e + 2.0) / 3.0) ** 2 * math.sqrt(e) - (e - 1.0) / 3.0


def finite_size_correction(geom: CavityGeometry, media: MediumSpec, ctx: WaveContext) -> float:
    """Leading finite-size correction to the propagating rate, over ``Gamma0``."""
    e1, e2 = complex(media.eps1), complex(media.eps2)
    if e1.imag or e2.imag:
        raise DomainError("finite-size formula needs real permittivities")
    e1, e2 = e1.real, e2.real
    if geom.R1 is None:
        raise DomainError("finite-size formula needs R1")
    y0, y1 = (ctx.k_tilde * geom.R0) ** 2, (ctx.k_tilde * geom.R1) ** 2
    s = math.sqrt(e2)
    first = (e1 - 1.0) * s * (y1 - y0)
    second = ((e2 - 1.0) / 3.0) * (y1 * (4.0 - e1) + (e1 - 1.0) * y0)
    factor = 1.0 + (2.0 / 3.0) * s - 2.0 * (e2 - 1.0) * (s - 1.0)
    return (11.0 / 30.0) * (first - second * factor)


def _host_integrals(eps2, ctx: WaveContext):
    """``int Im G`` for host and vacuum (closed form) and the mixed term by quadrature."""
    j_eps = transverse_residue_integral(eps2, ctx)
    j_one = transverse_residue_integral(1.0, ctx)
    # (eps-1) G0 G = (G0 - G) / kt^2
    mixed = (radial_transverse_im_integral(1.0, ctx) - radial_transverse_im_integral(eps2, ctx)) \
        / ctx.k_tilde ** 2
    return j_eps, j_one, mixed


def propagating_rate(geom: CavityGeometry, media: MediumSpec, ctx: WaveContext,
                     ratio: Optional[complex] = None) -> tuple:
    """Four-term propagating rate ``2 Gamma^P / Gamma0`` at the operating wavenumber.

    ``ratio`` is ``chi_perp/chi0`` at ``kt``; by default it is the uniform-field
    resummation of the shell, and 1 for a bare cavity.

    Returns
    -------
    rate : float
    parts : dict
        ``ratio``, ``Z = kt^2 ratio (eps2-1) C^{R1}_perp(kt)`` and the host integrals.
    """
    kt = ctx.k_tilde
    e2 = complex(media.eps2)
    if e2.imag != 0 or e2.real < 1:
        raise DomainError("host permittivity must be real and >= 1")
    if ratio is None:
        if geom.R1 is None or geom.R1 == geom.R0 or complex(media.eps1) == 1.0:
            ratio = 1.0 + 0j
        else:
            cs, _ = shell_cavity_factor(kt, geom, ctx)
            r = -(complex(media.eps1) - 1.0) * kt ** 2 * cs
            ratio = 1.0 / (1.0 - r)
    c_outer, _ = ball_cavity_factor(kt, geom.outer_radius, ctx)
    z = kt ** 2 * ratio * (e2 - 1.0) * c_outer
    j_eps, j_one, mixed = _host_integrals(e2.real, ctx)
    im_two_gamma_p = (2.0 * ratio.real * j_eps - 2.0 * z.real * j_one
                      + 2.0 * (z * z).real * j_eps + 4.0 * kt ** 2 * z.real * mixed)
    rate = -(2.0 * math.pi / kt) * im_two_gamma_p
    return float(rate), {"ratio": complex(ratio), "Z": complex(z), "int_im_g_host": j_eps,
                         "int_im_g_vacuum": j_one, "int_im_mixed": mixed}


def molecule_in_medium_rate(geom: CavityGeometry, media: MediumSpec, spec: EmitterSpec,
                            k_max_factor: float = DEFAULT_K_MAX_FACTOR) -> EmissionResult:
    """Propagating decay rate of an emitter in a molecule embedded in a host.

    The resonance is the self-consistent root of the resonance condition with
    the molecule's own γ factors; the rate follows from the four-term
    propagating formula at that wavenumber.
    """
    if geom.R1 is None:
        raise DomainError("molecule scenario needs R1")
    k_res, g, diag = _self_consistent_k(
        spec, lambda ctx: molecule_in_vacuum_gamma(geom, media.eps1, ctx, FULL_PIPELINE,
                                                   k_max_factor))
    ctx = spec.context(k_res)
    rate_p, parts = propagating_rate(geom, media, ctx)
    diag.update(parts)
    return EmissionResult(k_res, spec.alpha0 * (spec.k0 / k_res) ** 2, g, math.nan, rate_p, diag)


def bare_cavity_rate(geom: CavityGeometry, eps2, spec: EmitterSpec) -> EmissionResult:
    """Propagating rate of an emitter in an empty cavity of radius ``R0`` in a host.

    No molecule means no internal shift of the resonance, so ``k_res = k0``.
    """
    ctx = spec.context()
    bare = CavityGeometry(geom.R0)
    rate_p, parts = propagating_rate(bare, MediumSpec(1.0, eps2), ctx, ratio=1.0 + 0j)
    parts.update({"iterations": 0})
    return EmissionResult(spec.k0, spec.alpha0, None, math.nan, rate_p, parts)


# ---------------------------------------------------------------------------
# Coefficient extraction
# ---------------------------------------------------------------------------

@dataclass
class CoefficientTable:
    """Least-squares coefficients with standard errors."""

    names: tuple
    values: np.ndarray
    stderr: np.ndarray
    condition: float
    n_samples: int

    def __getitem__(self, name):
        return float(self.values[self.names.index(name)])

    def error(self, name):
        return float(self.stderr[self.names.index(name)])

    def as_dict(self) -> dict:
        return {n: (float(v), float(e)) for n, v, e in zip(self.names, self.values, self.stderr)}


def fit_coefficients(design: np.ndarray, y: np.ndarray, names: Sequence[str],
                     max_condition: float = 1e10) -> CoefficientTable:
    """Column-scaled least squares; raises IllConditionedFit above ``max_condition``."""
    design = np.asarray(design, float)
    y = np.asarray(y, float)
    scale = np.linalg.norm(design, axis=0)
    if np.any(scale == 0):
        raise IllConditionedFit("a basis column is identically zero")
    a = design / scale
    cond = float(np.linalg.cond(a))
    if cond > max_condition:
        raise IllConditionedFit(f"condition number {cond:.3g} exceeds {max_condition:.3g}")
    coef, _, _, _ = np.linalg.lstsq(a, y, rcond=None)
    resid = y - a @ coef
    dof = max(1, y.size - coef.size)
    s2 = float(resid @ resid) / dof
    cov = s2 * np.linalg.inv(a.T @ a)
    return CoefficientTable(tuple(names), coef / scale, np.sqrt(np.diag(cov)) / scale, cond, y.size)


def default_radius_pairs(values: Sequence[float] = (0.02, 0.03, 0.05, 0.07, 0.1, 0.14, 0.2)):
    """All ``(kt R0, kt R1)`` pairs with ``R0 < R1`` from ``values``."""
    return [(a, b) for i, a in enumerate(values) for b in values[i + 1:]]


DEFAULT_EPS_OFFSETS = (-0.04, -0.02, -0.01, 0.01, 0.02, 0.04)


def expansion_samples(radius_pairs=None, eps_offsets=DEFAULT_EPS_OFFSETS,
                      k_max_factor: float = DEFAULT_K_MAX_FACTOR):
    """Full-pipeline γ over a sweep of ``(kt R0, kt R1, eps1 - 1)`` at ``kt = 1``.

    Returns a list of ``(x0, x1, delta, GammaFactors)``.
    """
    ctx = WaveContext()
    pairs = radius_pairs or default_radius_pairs()
    out = []
    for x0, x1 in pairs:
        geom = CavityGeometry(x0, x1)
        grid = molecule_grid(geom, ctx, k_max_factor)
        chi1 = chi_first_order_molecule(geom, ctx, grid=grid)
        for d in eps_offsets:
            g = gamma_closed_form(chi_total_small_molecule(chi1, 1.0 + d), ctx)
            out.append((x0, x1, d, g))
    return out


def _fit_near_field(samples, n_orders: int = 3, nuisance_powers=(1,)) -> CoefficientTable:
    """Two-stage fit of ``Re gamma_par``.

    For each geometry the offsets ``d = eps1 - 1`` are resolved into the
    order coefficients ``F_n`` of ``sum_n d^n F_n`` (as many orders as
    distinct offsets).  Each ``F_n`` is then fitted across geometries with
    ``{1/x1^3, 1/x0^3, 1/x1, 1/x0}`` plus regular nuisance terms ``x^p``.
    """
    by_geom = {}
    for x0, x1, d, g in samples:
        by_geom.setdefault((x0, x1), []).append((d, g.gamma_par.real))
    per_order = {n: [] for n in range(1, n_orders + 1)}
    for (x0, x1), vals in by_geom.items():
        ds = np.array([v[0] for v in vals])
        ys = np.array([v[1] for v in vals])
        m = len(set(ds.tolist()))
        if m < n_orders:
            raise IllConditionedFit(f"need at least {n_orders} distinct eps1 offsets")
        vand = np.vander(ds, m + 1, increasing=True)[:, 1:]
        coef, *_ = np.linalg.lstsq(vand, ys, rcond=None)
        for n in range(1, n_orders + 1):
            per_order[n].append((x0, x1, coef[n - 1]))
    names, values, errs = [], [], []
    cond = 0.0
    for n in range(1, n_orders + 1):
        rows, y = [], []
        for x0, x1, f in per_order[n]:
            row = [1.0 / x1 ** 3, 1.0 / x0 ** 3, 1.0 / x1, 1.0 / x0]
            for p in nuisance_powers:
                row += [x1 ** p, x0 ** p]
            rows.append(row)
            y.append(f)
        sub_names = [f"A3_{n}", f"B3_{n}", f"A1_{n}", f"B1_{n}"]
        sub_names += [f"nuisance_{n}_{p}_{w}" for p in nuisance_powers for w in ("x1", "x0")]
        t = fit_coefficients(np.array(rows), np.array(y), sub_names)
        names += sub_names
        values.append(t.values)
        errs.append(t.stderr)
        cond = max(cond, t.condition)
    return CoefficientTable(tuple(names), np.concatenate(values), np.concatenate(errs), cond,
                            len(samples))


def extract_expansion_coefficients(samples, target: str) -> CoefficientTable:
    """Fit the pipeline γ against the ``(eps1-1)^n (kt R)^m`` basis.

    Parameters
    ----------
    samples : list
        Output of :func:`expansion_samples`.
    target : {"perp", "par"}
        ``"perp"`` fits the propagating (pole) part of ``2 gamma_perp``:
        its ``-Im`` against even powers and its ``Re`` against odd powers.
        ``"par"`` fits ``Re gamma_par`` against the near-field table
        ``(eps1-1)^n {1/x1^3, 1/x0^3, 1/x1, 1/x0}``, see :func:`_fit_near_field`.

    Returns
    -------
    CoefficientTable
        For ``"perp"`` the names ``c2``, ``c4``, ``c3``, ``c22`` hold the
        coefficients of ``d D2``, ``d D4``, ``d D3`` and ``d^2 D2^2`` with
        ``Dp = x1^p - x0^p``.  For ``"par"`` the names are ``A3_n``, ``B3_n``,
        ``A1_n``, ``B1_n``.
    """
    rows_x = []
    y = []
    if target == "perp":
        names = ("c2", "c4", "c6", "c22", "c24", "c222", "c3", "c5", "c23", "c33")
        for x0, x1, d, g in samples:
            D = {p: x1 ** p - x0 ** p for p in range(2, 7)}
            pole = g.two_gamma_perp_pole
            # even part: -Im(pole) - 1 ; odd part: Re(pole)
            rows_x.append([d * D[2], d * D[4], d * D[6], d * d * D[2] ** 2, d * d * D[2] * D[4],
                           d ** 3 * D[2] ** 3, 0, 0, 0, 0])
            y.append(-pole.imag - 1.0)
            rows_x.append([0, 0, 0, 0, 0, 0, d * D[3], d * D[5], d * d * D[2] * D[3],
                           d * d * D[3] ** 2])
            y.append(pole.real)
    elif target == "par":
        return _fit_near_field(samples)
    else:
        raise DomainError("target must be 'perp' or 'par'")
    return fit_coefficients(np.array(rows_x, float), np.array(y), names)
