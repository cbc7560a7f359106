"""Quadrature and series-summation engine.

Adaptive routines wrap :func:`scipy.integrate.quad` (QUADPACK), including its
Cauchy-weight mode for principal values.  The physics modules mostly rely on
the fixed composite Gauss-Legendre rules at the bottom of this file, which are
vectorised and deterministic.

Sign convention for poles: an integrand ``r(x) / (x - p + s*i0)`` with
``s = +1`` ("+i0") picks up ``-i*pi*r(p)`` on top of the principal value, and
``s = -1`` ("-i0") picks up ``+i*pi*r(p)``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from scipy import integrate as _integrate

from .errors import (
    DomainError,
    NonConvergence,
    PoleTooCloseToEndpoint,
    SeriesDiverging,
    SingularInterval,
    TailNotDecaying,
)

DEFAULT_QUAD_RTOL = 1e-8
DEFAULT_SERIES_RTOL = 1e-9
DEFAULT_MAX_TERMS = 64

SIMPLE_POLE = "simple-pole"
INTEGRABLE = "integrable"


@dataclass(frozen=True)
class Singularity:
    """Annotated singular abscissa of an integrand."""

    location: float
    kind: str = INTEGRABLE

    def __post_init__(self):
        if self.kind not in (SIMPLE_POLE, INTEGRABLE):
            raise DomainError(f"unknown singularity kind {self.kind!r}")


@dataclass(frozen=True)
class Integrand1D:
    """A scalar integrand with optional singularity annotations.

    Parameters
    ----------
    evaluator : callable
        Maps a real abscissa to a real or complex value.
    singularities : tuple of Singularity
        Known singular points.
    """

    evaluator: Callable[[float], complex]
    singularities: tuple = ()

    def __call__(self, x):
        return self.evaluator(x)


@dataclass(frozen=True)
class QuadratureResult:
    """Value of an integral with an error bound and an evaluation count."""

    value: complex
    error_estimate: float
    evaluations: int

    def __post_init__(self):
        if not self.error_estimate >= 0:
            raise DomainError("error_estimate must be non-negative")
        if self.evaluations < 1:
            raise DomainError("evaluations must be positive")


@dataclass(frozen=True)
class SeriesControl:
    """Stopping rule for :func:`sum_series`."""

    rel_tol: float = DEFAULT_SERIES_RTOL
    max_terms: int = DEFAULT_MAX_TERMS
    min_terms: int = 2

    def __post_init__(self):
        if not self.rel_tol > 0:
            raise DomainError("rel_tol must be positive")
        if self.max_terms < 1 or self.min_terms < 1:
            raise DomainError("term counts must be positive")
        if self.min_terms > self.max_terms:
            raise DomainError("min_terms exceeds max_terms")


def as_integrand(f) -> Integrand1D:
    """Wrap a plain callable as an :class:`Integrand1D`."""
    if isinstance(f, Integrand1D):
        return f
    return Integrand1D(f)


class _Counter:
    """Callable proxy that counts calls and rejects non-finite samples."""

    def __init__(self, f, part):
        self.f = f
        self.part = part
        self.calls = 0

    def __call__(self, x):
        self.calls += 1
        v = complex(self.f(x))
        if not (math.isfinite(v.real) and math.isfinite(v.imag)):
            raise SingularInterval(f"non-finite integrand at x={x!r}")
        return v.real if self.part == "re" else v.imag


def _quad_complex(f, a, b, rel_tol, abs_tol, points=None, limit=500, **kw):
    value = 0j
    err = 0.0
    calls = 0
    for part in ("re", "im"):
        g = _Counter(f, part)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", _integrate.IntegrationWarning)
            out = _integrate.quad(g, a, b, epsabs=abs_tol, epsrel=rel_tol,
                                  limit=limit, points=points, full_output=1, **kw)
        v, e = out[0], out[1]
        value += v if part == "re" else 1j * v
        err += abs(e)
        calls += g.calls
    return value, err, max(calls, 1)


def _check_tolerance(value, err, rel_tol, abs_tol, what):
    tol = max(abs_tol, rel_tol * abs(value), 1e-14)
    if not err <= tol:
        raise NonConvergence(f"{what}: error {err:.3g} above tolerance {tol:.3g}")


def integrate_adaptive(f, a: float, b: float, rel_tol: float = DEFAULT_QUAD_RTOL,
                       abs_tol: float = 0.0, limit: int = 500) -> QuadratureResult:
    """Adaptive integral of a complex function over a finite interval.

    Parameters
    ----------
    f : Integrand1D or callable
        Integrand.  Integrable singularities inside ``(a, b)`` should be
        annotated so the interval is split there.
    a, b : float
        Finite limits with ``a < b``.
    rel_tol, abs_tol : float
        Requested tolerances.

    Returns
    -------
    QuadratureResult

    Raises
    ------
    SingularInterval
        A simple pole is annotated inside the interval, or a non-finite
        sample is met.
    NonConvergence
        QUADPACK's error estimate stays above tolerance.
    """
    f = as_integrand(f)
    if not a < b:
        raise DomainError("integrate_adaptive needs a < b")
    points = []
    for s in f.singularities:
        if a < s.location < b:
            if s.kind == SIMPLE_POLE:
                raise SingularInterval(f"simple pole at {s.location} inside [{a}, {b}]")
            points.append(s.location)
    value, err, n = _quad_complex(f.evaluator, a, b, rel_tol, abs_tol,
                                  points=points or None, limit=limit)
    _check_tolerance(value, err, rel_tol, abs_tol, "integrate_adaptive")
    return QuadratureResult(value, err, n)


def plemelj_term(residue, sign_prescription: str) -> complex:
    """Delta-function contribution for a pole written as ``r/(x - p +- i0)``."""
    if sign_prescription == "+i0":
        return -1j * math.pi * residue
    if sign_prescription == "-i0":
        return 1j * math.pi * residue
    raise DomainError(f"unknown prescription {sign_prescription!r}")


def integrate_with_pole(f_smooth, pole: float, residue_numerator, a: float, b: float,
                        sign_prescription: str = "+i0",
                        rel_tol: float = DEFAULT_QUAD_RTOL) -> QuadratureResult:
    """Integral of ``f_smooth(x) + R(x) / (x - pole +- i0)`` over ``[a, b]``.

    Parameters
    ----------
    f_smooth : Integrand1D, callable or None
        Regular part of the integrand; ``None`` means zero.
    pole : float
        Location of the simple pole, strictly inside ``(a, b)``.
    residue_numerator : complex or callable
        Numerator ``R``.  A callable numerator is handled with QUADPACK's
        Cauchy weight; a constant one uses the closed-form principal value.
    sign_prescription : {"+i0", "-i0"}
        ``"+i0"`` adds ``-i*pi*R(pole)``, ``"-i0"`` adds ``+i*pi*R(pole)``.

    Returns
    -------
    QuadratureResult
    """
    if not a < pole < b:
        raise DomainError("integrate_with_pole needs a < pole < b")
    resolution = 1e-12 * max(1.0, abs(b - a), abs(pole))
    if min(pole - a, b - pole) < resolution:
        raise PoleTooCloseToEndpoint(f"pole {pole} within {resolution:.1e} of an endpoint")
    value = 0j
    err = 0.0
    calls = 0
    if f_smooth is not None:
        res = integrate_adaptive(f_smooth, a, b, rel_tol=rel_tol)
        value += res.value
        err += res.error_estimate
        calls += res.evaluations
    if callable(residue_numerator):
        pv, e, n = _quad_complex(residue_numerator, a, b, rel_tol, 0.0,
                                 weight="cauchy", wvar=pole)
        _check_tolerance(pv, e, rel_tol, 0.0, "integrate_with_pole")
        r0 = complex(residue_numerator(pole))
        value += pv
        err += e
        calls += n + 1
    else:
        r0 = complex(residue_numerator)
        value += r0 * math.log((b - pole) / (pole - a))
        calls += 1
    value += plemelj_term(r0, sign_prescription)
    return QuadratureResult(value, err, max(calls, 1))


def integrate_semi_infinite(f, a: float, tail_decay_order: float,
                            rel_tol: float = DEFAULT_QUAD_RTOL,
                            first_span: float | None = None,
                            max_doublings: int = 60) -> QuadratureResult:
    """Integral over ``[a, inf)`` of an algebraically decaying integrand.

    The interval is truncated at ``T`` and ``T`` is doubled repeatedly.  For
    ``|f| ~ x**-p`` the piece gained by a doubling and the remaining tail
    stand in the fixed ratio ``1 / (2**(p-1) - 1)``, which is used to
    extrapolate the tail.  Iteration stops once two successive extrapolated
    values agree to ``rel_tol``.

    Parameters
    ----------
    f : Integrand1D or callable
    a : float
        Lower limit.
    tail_decay_order : float
        Exponent ``p > 1`` of the algebraic decay.
    rel_tol : float
    first_span : float, optional
        Length of the first finite piece; defaults to ``max(1, |a|)``.

    Raises
    ------
    TailNotDecaying
        The doubling increments stop shrinking.
    """
    f = as_integrand(f)
    p = float(tail_decay_order)
    if not p > 1:
        raise DomainError("tail_decay_order must exceed 1")
    factor = 1.0 / (2.0 ** (p - 1.0) - 1.0)
    span = float(first_span) if first_span else max(1.0, abs(a))
    t_prev = max(a + span, 2.0 * a)
    first = integrate_adaptive(f, a, t_prev, rel_tol=rel_tol * 0.1)
    total = first.value
    err = first.error_estimate
    calls = first.evaluations
    prev_extrap = None
    prev_piece = None
    growth = 0
    for _ in range(max_doublings):
        t_next = 2.0 * t_prev
        piece = integrate_adaptive(f, t_prev, t_next, rel_tol=rel_tol * 0.1,
                                   abs_tol=1e-3 * rel_tol * max(abs(total), 1e-300))
        total += piece.value
        err += piece.error_estimate
        calls += piece.evaluations
        extrap = total + factor * piece.value
        if prev_piece is not None and abs(piece.value) > abs(prev_piece) and abs(piece.value) > 0:
            growth += 1
            if growth >= 3:
                raise TailNotDecaying("doubling increments are not shrinking")
        else:
            growth = 0
        if prev_extrap is not None:
            change = abs(extrap - prev_extrap)
            if change <= rel_tol * abs(extrap) or change == 0.0:
                return QuadratureResult(extrap, err + change, calls)
        prev_extrap = extrap
        prev_piece = piece.value
        t_prev = t_next
    raise TailNotDecaying("tail extrapolation did not settle")


def sum_series(term_generator: Callable[[int], complex],
               control: SeriesControl = SeriesControl()) -> tuple[complex, int]:
    """Sum ``term_generator(n)`` for ``n = 0, 1, ...`` until it settles.

    Stops once at least ``control.min_terms`` terms are in and the last term
    is below ``rel_tol`` times the partial sum.

    Returns
    -------
    value : complex
    terms_used : int

    Raises
    ------
    SeriesDiverging
        Three consecutive term-magnitude increases after ``min_terms``.
    NonConvergence
        ``max_terms`` reached first.
    """
    total = 0j
    rises = 0
    last_mag = None
    for n in range(control.max_terms):
        t = complex(term_generator(n))
        total += t
        mag = abs(t)
        used = n + 1
        if used > control.min_terms and last_mag is not None and mag > last_mag:
            rises += 1
            if rises >= 3:
                raise SeriesDiverging(f"terms grew three times in a row (n={n})")
        else:
            rises = 0
        last_mag = mag
        if used >= control.min_terms and mag <= control.rel_tol * abs(total):
            return total, used
        if used >= control.min_terms and mag == 0.0 and total == 0:
            return total, used
    raise NonConvergence(f"series not converged after {control.max_terms} terms")


# ---------------------------------------------------------------------------
# Fixed composite rules
# ---------------------------------------------------------------------------

@lru_cache(maxsize=64)
def gauss_legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [-1, 1] (cached, read-only)."""
    x, w = np.polynomial.legendre.leggauss(int(n))
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def panel_rule(edges: Sequence[float], order: int = 10) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre nodes and weights over consecutive panels."""
    e = np.asarray(edges, dtype=float)
    if e.ndim != 1 or e.size < 2 or np.any(np.diff(e) <= 0):
        raise DomainError("panel edges must be strictly increasing")
    xg, wg = gauss_legendre(order)
    mid = 0.5 * (e[1:] + e[:-1])
    half = 0.5 * np.diff(e)
    x = (mid[:, None] + half[:, None] * xg[None, :]).ravel()
    w = (half[:, None] * wg[None, :]).ravel()
    return x, w


def graded_edges(a: float, b: float, h_first: float, h_max: float,
                 growth: float = 1.3) -> np.ndarray:
    """Panel edges from ``a`` to ``b`` with widths growing geometrically.

    Widths start at ``h_first`` and grow by ``growth`` per panel until they
    reach ``h_max``; the last panel is stretched to land on ``b``.
    """
    if not b > a:
        raise DomainError("graded_edges needs b > a")
    edges = [a]
    h = min(h_first, h_max)
    x = a
    while x + h < b - 0.5 * h:
        x += h
        edges.append(x)
        h = min(h * growth, h_max)
    edges.append(b)
    return np.asarray(edges)


@dataclass
class PoleRule:
    """Composite rule for ``int_a^b phi(x) / (x - p + s*i0) dx`` plus a regular tail.

    The pole ``p`` is a panel edge, so no node sits on it.  On ``[a, b]`` the
    rule integrates ``(phi(x) - phi(p)) / (x - p)`` and adds the closed-form
    principal value of the constant part plus the Plemelj term.  Nodes beyond
    ``b`` carry ordinary weights ``w / (x - p)``.

    Attributes
    ----------
    nodes, weights : ndarray
        All nodes (core then tail) and their plain quadrature weights.
    n_core : int
        Number of nodes inside ``[a, b]``.
    pole, a, b : float
    checkpoints : ndarray
        Node counts at which partial sums are recorded for tail extrapolation.
    """

    nodes: np.ndarray
    weights: np.ndarray
    n_core: int
    pole: float
    a: float
    b: float
    checkpoints: np.ndarray = field(default_factory=lambda: np.zeros(0, int))

    @property
    def log_term(self) -> float:
        return math.log((self.b - self.pole) / (self.pole - self.a))

    def integrate(self, phi_nodes: np.ndarray, phi_pole: complex,
                  sign_prescription: str = "-i0", tail_order: float | None = None):
        """Evaluate the rule.

        Parameters
        ----------
        phi_nodes : ndarray
            Numerator at ``self.nodes``; trailing axes are allowed.
        phi_pole : complex or ndarray
            Numerator at the pole.
        tail_order : float, optional
            If given, extrapolate the upper tail assuming the integrand
            decays like ``x**-tail_order`` (see :func:`tail_factors`).

        Returns
        -------
        value, error_estimate
        """
        x = self.nodes
        d = x - self.pole
        shape = (-1,) + (1,) * (np.ndim(phi_nodes) - 1)
        w = self.weights.reshape(shape)
        dd = d.reshape(shape)
        core = slice(0, self.n_core)
        integrand = np.empty(np.shape(phi_nodes), dtype=complex)
        integrand[core] = (phi_nodes[core] - phi_pole) / dd[core]
        integrand[self.n_core:] = phi_nodes[self.n_core:] / dd[self.n_core:]
        contrib = integrand * w
        base = np.asarray(phi_pole) * self.log_term + plemelj_term(np.asarray(phi_pole),
                                                                   sign_prescription)
        return _finish_with_tail(contrib, base, self.checkpoints, tail_order, self.nodes)


def tail_factors(nodes: np.ndarray, checkpoints, tail_order):
    """Per-node factors for the tail-extrapolated value of a truncated integral.

    The partial integrals are averaged over the windows ``[K/4, K/2]`` and
    ``[K/2, K]`` (a linear taper on the node weights), which suppresses
    oscillating tails like ``cos(K R)/K^p`` by ``~1/(K R)``; the two averages
    scale exactly like a power-law tail and are Richardson-extrapolated.

    Returns
    -------
    s_value, s_error : ndarray
        ``sum(s_value * w * f)`` is the extrapolated integral and
        ``|sum(s_error * w * f)|`` the size of the extrapolation step.
    """
    x = np.asarray(nodes, float)
    ones = np.ones_like(x)
    if tail_order is None or len(checkpoints) < 3:
        return ones, np.zeros_like(x)
    c1, c2, c3 = (int(c) for c in checkpoints[-3:])
    # checkpoints count nodes below K/4, K/2, K; tail panels are uniform, so
    # each edge sits midway between its neighbouring nodes
    k4 = 0.5 * (x[c1 - 1] + x[c1])
    k2 = 0.5 * (x[c2 - 1] + x[c2])
    k1 = x[c3 - 1] + (x[c2] - k2)
    half = np.zeros_like(x)
    half[:c1] = 1.0
    half[c1:c2] = (k2 - x[c1:c2]) / (k2 - k4)
    full = np.zeros_like(x)
    full[:c2] = 1.0
    full[c2:c3] = (k1 - x[c2:c3]) / (k1 - k2)
    f = 1.0 / (2.0 ** (tail_order - 1.0) - 1.0)
    return (1.0 + f) * full - f * half, f * (full - half)


def _finish_with_tail(contrib, base, checkpoints, tail_order, nodes=None):
    if tail_order is None or len(checkpoints) < 3 or nodes is None:
        value = base + contrib.sum(axis=0)
        return value, np.zeros(np.shape(value))
    s_val, s_err = tail_factors(nodes, checkpoints, tail_order)
    shape = (-1,) + (1,) * (np.ndim(contrib) - 1)
    value = base + (contrib * s_val.reshape(shape)).sum(axis=0)
    err = np.abs((contrib * s_err.reshape(shape)).sum(axis=0))
    return value, err


@dataclass
class PlainRule:
    """Composite rule over ``[a, K]`` with checkpoints at ``K/4, K/2, K``."""

    nodes: np.ndarray
    weights: np.ndarray
    checkpoints: np.ndarray

    def integrate(self, f_nodes: np.ndarray, tail_order: float | None = None):
        shape = (-1,) + (1,) * (np.ndim(f_nodes) - 1)
        contrib = np.asarray(f_nodes) * self.weights.reshape(shape)
        return _finish_with_tail(contrib, 0.0, self.checkpoints, tail_order, self.nodes)


def _doubling_edges(start_edges: np.ndarray, k_max: float, h_max: float):
    """Extend ``start_edges`` to ``k_max`` with uniform panels; mark K/4, K/2."""
    e0 = np.asarray(start_edges, float)
    last = e0[-1]
    marks = [k_max / 4.0, k_max / 2.0, k_max]
    edges = list(e0)
    for m in marks:
        if m <= last:
            continue
        n = max(1, int(math.ceil((m - last) / h_max)))
        edges.extend(np.linspace(last, m, n + 1)[1:])
        last = m
    edges = np.asarray(edges)
    ids = [int(np.searchsorted(edges, m - 1e-12 * m)) for m in marks]
    return edges, ids


def radial_pole_rule(pole: float, length_min: float, length_max: float,
                     k_max: float, order: int = 10, growth: float = 1.25) -> PoleRule:
    """Rule for radial integrals with a pole at ``pole`` and features at ``1/length``.

    Panels are fine near the origin and the pole, grow geometrically, and
    are capped at ``pi / (2 length_max)`` so oscillations ``cos(k R)`` with
    ``R <= length_max`` stay resolved.  The rule runs to ``k_max`` with
    checkpoints at ``k_max/4`` and ``k_max/2`` for tail extrapolation.
    """
    h_osc = 0.5 * math.pi / length_max
    h0 = min(0.25 * pole, h_osc)
    n_side = max(4, int(math.ceil(pole / h0)))
    left = np.linspace(0.0, pole, n_side + 1)
    b = 2.0 * pole
    right = np.linspace(pole, b, n_side + 1)
    head = graded_edges(b, max(b + h0, min(k_max / 4.0, b + 40.0 / length_min)),
                        h0, h_osc, growth)
    core_edges = np.concatenate([left, right[1:]])
    tail_start = np.concatenate([[b], head[1:]]) if head.size > 1 else np.array([b])
    tail_edges, ids = _doubling_edges(tail_start, k_max, h_osc)
    xc, wc = panel_rule(core_edges, order)
    if tail_edges.size > 1:
        xt, wt = panel_rule(tail_edges, order)
    else:
        xt, wt = np.zeros(0), np.zeros(0)
    n_core = xc.size
    chk = np.array([n_core + i * order for i in ids], dtype=int)
    return PoleRule(np.concatenate([xc, xt]), np.concatenate([wc, wt]), n_core,
                    pole, 0.0, b, chk)


def radial_plain_rule(length_min: float, length_max: float, k_max: float,
                      order: int = 10, growth: float = 1.25) -> PlainRule:
    """Pole-free counterpart of :func:`radial_pole_rule`."""
    h_osc = 0.5 * math.pi / length_max
    h0 = min(0.05 / length_max, h_osc)
    head = graded_edges(0.0, min(k_max / 4.0, 40.0 / length_min), h0, h_osc, growth)
    edges, ids = _doubling_edges(head, k_max, h_osc)
    x, w = panel_rule(edges, order)
    chk = np.array([i * order for i in ids], dtype=int)
    return PlainRule(x, w, chk)
