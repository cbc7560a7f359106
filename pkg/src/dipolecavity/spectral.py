"""Functions of the radial wavenumber sampled on a quadrature grid.

A :class:`SpectralGrid` owns one radial rule (fine near the origin and the
``k = k_tilde`` pole, oscillation-resolving out to ``k_max``) and exposes
the radial integrals used everywhere as linear functionals, so the same
weights serve single integrals and the kernel matrices of the recursion.

Normalized integrals follow the γ-factor convention: a factor ``2 pi / kt``
times ``int d3k/(2 pi)^3 = (1 / 2 pi^2) int k^2 dk``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.interpolate import CubicSpline

from . import numerics
from .errors import DomainError
from .propagators import WaveContext


def _richardson_weights(nodes, weights, checkpoints, tail_order):
    """Fold the tail extrapolation into the quadrature weights.

    Returns ``(w_value, w_error)`` so that ``w_value @ f`` is the extrapolated
    integral and ``|w_error @ f|`` its error estimate.
    """
    s_val, s_err = numerics.tail_factors(nodes, checkpoints, tail_order)
    w = np.asarray(weights, dtype=float)
    return w * s_val, w * s_err


@dataclass
class SpectralGrid:
    """Radial grid with a simple pole at ``k_tilde``.

    Attributes
    ----------
    ctx : WaveContext
    rule : numerics.PoleRule
    """

    ctx: WaveContext
    rule: numerics.PoleRule
    _cache: dict = field(default_factory=dict, repr=False)

    @classmethod
    def build(cls, ctx: WaveContext, length_min: float, length_max: float,
              k_max_factor: float = 2000.0, order: int = 10) -> "SpectralGrid":
        """Grid resolving lengths in ``[length_min, length_max]`` up to ``k_max_factor/length_min``."""
        if not (length_min > 0 and length_max >= length_min):
            raise DomainError("need 0 < length_min <= length_max")
        k_max = max(k_max_factor / length_min, 40.0 * ctx.k_tilde)
        rule = numerics.radial_pole_rule(ctx.k_tilde, length_min, length_max, k_max, order=order)
        return cls(ctx, rule)

    @property
    def nodes(self) -> np.ndarray:
        return self.rule.nodes

    @property
    def pole(self) -> float:
        return self.rule.pole

    @property
    def size(self) -> int:
        return self.rule.nodes.size

    @property
    def k_max(self) -> float:
        return float(self.rule.nodes[-1])

    @property
    def all_points(self) -> np.ndarray:
        """Nodes followed by the pole."""
        return np.concatenate([self.rule.nodes, [self.rule.pole]])

    # -- linear functionals ------------------------------------------------

    def pole_functional(self, tail_order: Optional[float] = 2.0, prescription: str = "-i0"):
        """Weights for ``int_0^inf phi(k) / (k - kt -+ i0) dk``.

        Returns ``(c_nodes, c_pole, e_nodes)``: the integral is
        ``c_nodes @ phi(nodes) + c_pole * phi(kt)`` and ``|e_nodes @ phi|``
        estimates the tail error.
        """
        key = ("pole", tail_order, prescription)
        if key not in self._cache:
            r = self.rule
            w, e = _richardson_weights(r.nodes, r.weights, r.checkpoints, tail_order)
            d = r.nodes - r.pole
            c = w / d
            core = slice(0, r.n_core)
            c_pole = (r.log_term + numerics.plemelj_term(1.0, prescription)
                      - np.sum(w[core] / d[core]))
            self._cache[key] = (c, complex(c_pole), e / d)
        return self._cache[key]

    def plain_functional(self, tail_order: Optional[float] = 2.0):
        """Weights for ``int_0^inf f(k) dk`` over the nodes: ``(w_value, w_error)``."""
        key = ("plain", tail_order)
        if key not in self._cache:
            self._cache[key] = _richardson_weights(self.rule.nodes, self.rule.weights,
                                                   self.rule.checkpoints,
                                                   tail_order)
        return self._cache[key]

    def transverse_functional(self, tail_order: Optional[float] = 2.0):
        """Weights for ``int_0^inf k^2 G_perp^0(k) F(k) dk`` with outgoing waves.

        Returns ``(a_nodes, a_pole, e_nodes)`` acting on ``F`` itself.
        """
        key = ("perp", tail_order)
        if key not in self._cache:
            kt = self.pole
            c, cp, e = self.pole_functional(tail_order, "-i0")
            x = self.rule.nodes
            phi = -x ** 2 / (x + kt)
            self._cache[key] = (c * phi, cp * (-kt / 2.0), e * phi)
        return self._cache[key]

    def longitudinal_functional(self, tail_order: Optional[float] = 2.0):
        """Weights for ``int_0^inf k^2 F(k) dk``: ``(w_value, w_error)``."""
        key = ("par", tail_order)
        if key not in self._cache:
            w, e = self.plain_functional(tail_order)
            x2 = self.rule.nodes ** 2
            self._cache[key] = (w * x2, e * x2)
        return self._cache[key]

    # -- normalized γ integrals -------------------------------------------

    def normalized_perp(self, f_nodes, f_pole, tail_order: Optional[float] = 2.0):
        """``(2 pi/kt) * 2 int d3k/(2pi)^3 G_perp^0(k) f(k)`` and an error estimate."""
        a, ap, e = self.transverse_functional(tail_order)
        norm = 2.0 / (math.pi * self.ctx.k_tilde)
        val = norm * (a @ f_nodes + ap * f_pole)
        return complex(val), float(norm * abs(e @ f_nodes))

    def normalized_par(self, f_nodes, tail_order: Optional[float] = 2.0):
        """``(2 pi/kt) int d3k/(2pi)^3 G_par^0 f(k)`` with ``G_par^0 = 1/kt^2``."""
        w, e = self.longitudinal_functional(tail_order)
        kt = self.ctx.k_tilde
        norm = 1.0 / (math.pi * kt ** 3)
        return complex(norm * (w @ f_nodes)), float(norm * abs(e @ f_nodes))

    def perp_delta_part(self, f_pole) -> complex:
        """Delta-function (propagating) part of :meth:`normalized_perp`: ``-i f(kt)``."""
        return -1j * complex(f_pole)

    # -- kernel matrices ----------------------------------------------------

    def moments(self, corr):
        """Angular moments ``M0, M2`` between all points (nodes then pole), cached per ``corr``."""
        from .cavity_factors import angular_moments

        key = ("moments", corr.kind, corr.terms)
        if key not in self._cache:
            pts = self.all_points
            m0, m2 = angular_moments(pts[:, None], pts[None, :], corr)
            self._cache[key] = (m0, m2)
        return self._cache[key]


@dataclass
class SpectralFunction:
    """Complex function of ``k`` sampled at grid nodes, at the pole and at infinity.

    Attributes
    ----------
    k : ndarray
        Abscissas (grid nodes).
    values : ndarray
        Samples at ``k``.
    at_pole : complex
        Value at ``k = k_tilde``.
    limit : complex
        Constant approached as ``k -> inf``.
    grid : SpectralGrid, optional
    """

    k: np.ndarray
    values: np.ndarray
    at_pole: complex = 0j
    limit: complex = 0j
    grid: Optional[SpectralGrid] = None

    def __post_init__(self):
        self.k = np.asarray(self.k, float)
        self.values = np.asarray(self.values, complex)
        if self.values.shape != self.k.shape:
            raise DomainError("values must match abscissas")

    @classmethod
    def constant(cls, grid: SpectralGrid, value: complex) -> "SpectralFunction":
        return cls(grid.nodes, np.full(grid.size, complex(value)), complex(value),
                   complex(value), grid)

    @classmethod
    def on_grid(cls, grid: SpectralGrid, all_values, limit=0j) -> "SpectralFunction":
        """From values at ``grid.all_points`` (nodes then pole)."""
        v = np.asarray(all_values, complex)
        return cls(grid.nodes, v[:-1], complex(v[-1]), complex(limit), grid)

    @property
    def all_values(self) -> np.ndarray:
        return np.concatenate([self.values, [self.at_pole]])

    def map(self, fn) -> "SpectralFunction":
        """Apply a pointwise function to every sample."""
        with np.errstate(divide="ignore", invalid="ignore"):
            return SpectralFunction(self.k, fn(self.values), complex(fn(np.asarray(self.at_pole))),
                                    complex(fn(np.asarray(self.limit))), self.grid)

    def combine(self, other: "SpectralFunction", fn) -> "SpectralFunction":
        """Pointwise binary operation with a function on the same abscissas."""
        if other.k.shape != self.k.shape or not np.array_equal(other.k, self.k):
            raise DomainError("spectral functions live on different grids")
        with np.errstate(divide="ignore", invalid="ignore"):
            return SpectralFunction(self.k, fn(self.values, other.values),
                                    complex(fn(np.asarray(self.at_pole), np.asarray(other.at_pole))),
                                    complex(fn(np.asarray(self.limit), np.asarray(other.limit))),
                                    self.grid)

    def __add__(self, other):
        if isinstance(other, SpectralFunction):
            return self.combine(other, np.add)
        return self.map(lambda v: v + other)

    def __sub__(self, other):
        if isinstance(other, SpectralFunction):
            return self.combine(other, np.subtract)
        return self.map(lambda v: v - other)

    def __mul__(self, other):
        if isinstance(other, SpectralFunction):
            return self.combine(other, np.multiply)
        return self.map(lambda v: v * other)

    __rmul__ = __mul__

    def __call__(self, k):
        """Cubic interpolation between samples (the pole value included)."""
        x = np.concatenate([self.k, [self.grid.pole]]) if self.grid is not None else self.k
        y = self.all_values if self.grid is not None else self.values
        order = np.argsort(x, kind="stable")
        x, y = x[order], y[order]
        keep = np.concatenate([[True], np.diff(x) > 0])
        if not np.all(np.isfinite(y[keep])):
            raise DomainError("cannot interpolate a function with non-finite samples")
        spl = CubicSpline(x[keep], y[keep])
        return spl(np.asarray(k, float))

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.all_values)))


@dataclass
class SpectralPair:
    """Transverse and longitudinal spectral functions on a shared grid."""

    perp: SpectralFunction
    par: SpectralFunction

    def __iter__(self):
        return iter((self.perp, self.par))
