"""Cavity and molecular-shell correlation functions and their Fourier transforms.

A correlation function ``g(r) = w_delta * 1 + h(r)`` enters the convolutions
through its constant part (weight ``w_delta``, a delta function in k-space)
and its localized part ``h``.  Only piecewise-constant radial ``h`` built
from ball indicators is supported:

* bare cavity of radius ``R0``: ``w_delta = 1`` and ``h = -1`` inside ``R0``;
* molecular shell ``R0 < r < R1``: ``w_delta = 0`` and ``h = +1`` on the shell.

The shell carries no constant part, so every process it generates is
irreducible.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DomainError, GeometryError, ValidityWarning

BALL = "ball-exclusion"
SHELL = "shell"
NONE = "none"

SMALL_MOLECULE_WARN = 0.5
_SERIES_SWITCH = 0.05


@dataclass(frozen=True)
class CavityGeometry:
    """Radii of the emitter cavity (``R0``) and of the molecule (``R1``).

    ``R1 = None`` selects the bare-cavity scenario.  ``R1 == R0`` is allowed
    and describes an empty shell (a point-like molecule).
    """

    R0: float
    R1: Optional[float] = None

    def __post_init__(self):
        if not (np.isfinite(self.R0) and self.R0 > 0):
            raise GeometryError(f"R0 must be positive, got {self.R0!r}")
        if self.R1 is not None:
            if not np.isfinite(self.R1) or self.R1 < self.R0:
                raise GeometryError(f"R1 must be finite and >= R0, got {self.R1!r}")

    @property
    def is_molecule(self) -> bool:
        return self.R1 is not None

    @property
    def outer_radius(self) -> float:
        return self.R1 if self.R1 is not None else self.R0

    def check_small_molecule(self, k_tilde: float, threshold: float = SMALL_MOLECULE_WARN) -> bool:
        """Warn when ``k_tilde * R1`` exceeds the small-molecule threshold."""
        if self.R1 is not None and k_tilde * self.R1 > threshold:
            warnings.warn(f"k_tilde*R1 = {k_tilde * self.R1:.3g} exceeds {threshold}; "
                          "uniform-field resummation is doubtful", ValidityWarning, stacklevel=2)
            return False
        return True


def ball_indicator_ft(q, R: float):
    """Fourier transform of the indicator of a ball of radius ``R``.

    ``4 pi (sin qR - qR cos qR) / q**3``, with a Taylor series below
    ``qR = 0.05`` where the closed form loses digits to cancellation.
    """
    if not R > 0:
        raise DomainError("R must be positive")
    q = np.abs(np.asarray(q, dtype=float))
    x = q * R
    small = x < _SERIES_SWITCH
    out = np.empty_like(x)
    xs = x[small]
    out[small] = (4.0 * math.pi / 3.0) * R ** 3 * (1.0 - xs ** 2 / 10.0 + xs ** 4 / 280.0
                                                     - xs ** 6 / 15120.0)
    xl = x[~small]
    out[~small] = 4.0 * math.pi * R ** 3 * (np.sin(xl) - xl * np.cos(xl)) / xl ** 3
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class CorrelationFT:
    """Localized part ``h`` of a correlation function as a signed sum of balls.

    Attributes
    ----------
    kind : str
        ``"ball-exclusion"``, ``"shell"`` or ``"none"``.
    terms : tuple of (sign, radius)
        ``h(q) = sum sign * ball_indicator_ft(q, radius)``.
    delta_weight : float
        Weight of the constant part of ``g`` (a k-space delta function).
    """

    kind: str
    terms: tuple = ()
    delta_weight: float = 1.0
    geometry: Optional[CavityGeometry] = field(default=None, compare=False)

    def __call__(self, q):
        return self.evaluator(q)

    def evaluator(self, q):
        q = np.asarray(q, dtype=float)
        out = np.zeros(q.shape)
        for sign, radius in self.terms:
            out = out + sign * np.asarray(ball_indicator_ft(q, radius))
        return out if out.ndim else float(out)

    @property
    def value_at_origin(self) -> float:
        """Real-space ``h(r = 0)``."""
        # h(0) = sum of signs of balls containing the origin, i.e. all of them
        # for a shell only if the inner and outer signs cancel.
        if self.kind == SHELL:
            return 0.0
        return float(sum(s for s, _ in self.terms))

    @property
    def volume_integral(self) -> float:
        """``q -> 0`` limit, the signed real-space volume of ``h``."""
        return float(sum(s * 4.0 * math.pi * r ** 3 / 3.0 for s, r in self.terms))

    @property
    def radii(self) -> tuple:
        return tuple(r for _, r in self.terms)

    @property
    def is_zero(self) -> bool:
        return len(self.terms) == 0


def no_correlation() -> CorrelationFT:
    """Uncorrelated medium: ``g = 1`` and ``h = 0``."""
    return CorrelationFT(NONE, (), 1.0)


def cavity_correlation(geom: CavityGeometry) -> CorrelationFT:
    """Bare cavity: ``g = 1 - indicator(r < R0)``."""
    return CorrelationFT(BALL, ((-1.0, geom.R0),), 1.0, geom)


def shell_correlation(geom: CavityGeometry) -> CorrelationFT:
    """Molecular shell: ``g = indicator(R0 < r < R1)``, no constant part."""
    if geom.R1 is None:
        raise GeometryError("shell correlation needs R1")
    if geom.R1 == geom.R0:
        return CorrelationFT(SHELL, (), 0.0, geom)
    return CorrelationFT(SHELL, ((1.0, geom.R1), (-1.0, geom.R0)), 0.0, geom)


def cavity_hc_ft(q, geom: CavityGeometry):
    """``h_C(q) = -ball_indicator_ft(q, R0)`` of the bare cavity."""
    v = -np.asarray(ball_indicator_ft(q, geom.R0))
    return v if v.ndim else float(v)


def shell_gc_ft(q, geom: CavityGeometry):
    """Shell correlation transform ``ball(R1) - ball(R0)``, the FT of ``+indicator(R0<r<R1)``."""
    if geom.R1 is None:
        raise GeometryError("shell_gc_ft needs a molecule geometry (R1)")
    v = np.asarray(ball_indicator_ft(q, geom.R1)) - np.asarray(ball_indicator_ft(q, geom.R0))
    return v if v.ndim else float(v)
