"""Cavity factors C_perp(k), C_par(k) by a real-space and a k-space route.

For a localized correlation ``h`` the cavity factors are

    C_perp(k) = 1/2 int d3r exp(i k.r) h(r) Tr{G0(r) (I - kk)}
    C_par(k)  =     int d3r exp(i k.r) h(r) Tr{G0(r) kk}

with ``G0(r)`` the free dyadic including its contact term.  In k-space the
same objects read

    C_perp(k) = 1/(8 pi^2) int k'^2 G_perp^0(k') (M0 + M2)(k, k') dk' + G_par W_s(k) / 2
    C_par(k)  = 1/(4 pi^2) int k'^2 G_perp^0(k') (M0 - M2)(k, k') dk' + G_par W_c(k)

where ``M_m(k, k') = int_{-1}^{1} u^m h(|k - k'|) du`` are angular moments and
``W_c``, ``W_s`` the closed-form ``cos^2`` and ``sin^2`` weighted volume
integrals of ``h``.  Agreement of the two routes pins all normalizations.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.special import sici, spherical_jn

from . import numerics
from .correlations import (
    BALL,
    SHELL,
    CavityGeometry,
    CorrelationFT,
    cavity_correlation,
    shell_correlation,
)
from .errors import DomainError, GeometryError, GridTooCoarse
from .propagators import WaveContext

REAL_SPACE = "real-space"
K_SPACE = "k-space"

# k*r below which the radial integral is done by Gauss-Legendre rather than
# the closed form in exponential integrals.
_CLOSED_FORM_SWITCH = 1.0
# Angular moments use the closed form in q only above this min(k, k')*R and
# below this ratio max/min (the closed form cancels like (max/min)**3).
_MOMENT_MIN_PHASE = 5.0
_MOMENT_MAX_RATIO = 100.0


# ---------------------------------------------------------------------------
# Real-space route
# ---------------------------------------------------------------------------

def _stable_kernels(k, r, kt):
    """Radial kernels ``K_perp, K_par`` with the near-field cancellations removed.

    ``C = -int h(r) K(r) dr`` for a radial ``h``.  Written with ``j0, j2`` so
    the ``1/x^2`` pieces cancel analytically.
    """
    x = kt * r
    y = k * r
    j0 = spherical_jn(0, y)
    j2 = spherical_jn(2, y)
    with np.errstate(divide="ignore", invalid="ignore"):
        j2_y2 = np.where(y > 0, j2 / np.where(y > 0, y, 1.0) ** 2, 1.0 / 15.0)
    kappa2 = (k / kt) ** 2
    j2_x2 = kappa2 * j2_y2
    pref = r * np.exp(1j * x)
    kp = pref * ((2.0 * j0 - j2) / 3.0 - 1j * j2 / x + j2_x2)
    kl = pref * (2.0 * (j0 + j2) / 3.0 + 2j * j2 / x - 2.0 * j2_x2)
    return kp, kl


def _exp_power_integrals(kappa, a, b, nmax=4):
    """``I_n = int_a^b r**-n exp(i kappa r) dr`` for ``n = 0..nmax`` (``a > 0``)."""
    kappa = np.asarray(kappa, dtype=float)
    a = np.broadcast_to(np.asarray(a, dtype=float), kappa.shape)
    b = float(b)
    ak = np.abs(kappa)
    nz = ak > 0
    safe = np.where(nz, kappa, 1.0)
    d = b - a
    i0 = np.where(nz, np.exp(1j * kappa * a) * np.expm1(1j * safe * d) / (1j * safe), d + 0j)
    sb, cb = sici(ak * b)
    sa, ca = sici(np.where(nz, ak * a, 1.0))
    i1 = np.where(nz, (cb - ca) + 1j * np.sign(kappa) * (sb - sa), np.log(b / a) + 0j)
    out = [i0, i1]
    ea = np.exp(1j * kappa * a)
    eb = np.exp(1j * kappa * b)
    for n in range(2, nmax + 1):
        prev = out[-1]
        out.append((a ** (1 - n) * ea - b ** (1 - n) * eb) / (n - 1) + 1j * kappa / (n - 1) * prev)
    return out


def _closed_form_interval(k, kt, a, b):
    """``-int_a^b K dr`` (``h = +1`` on ``[a, b]``) via exponential integrals; ``a > 0``."""
    ip = _exp_power_integrals(kt + k, a, b)
    im = _exp_power_integrals(kt - k, a, b)

    def s(n):
        return (ip[n] - im[n]) / 2j

    def c(n):
        return (ip[n] + im[n]) / 2.0

    a_sin = (s(0) + 1j / kt * s(1) - s(2) / kt ** 2) / k
    b_term = ((-s(2) - 3j / kt * s(3) + 3.0 / kt ** 2 * s(4)) / k ** 3
              - (-c(1) - 3j / kt * c(2) + 3.0 / kt ** 2 * c(3)) / k ** 2)
    ab_sin = (-2j / kt * s(1) + 2.0 / kt ** 2 * s(2)) / k
    return -(a_sin + b_term), -(ab_sin - 2.0 * b_term)


def _gl_interval(k, kt, a, b, n):
    """``-int_a^b K dr`` by ``n``-point Gauss-Legendre, per-row limits ``a``, ``b``."""
    xg, wg = numerics.gauss_legendre(n)
    a = np.asarray(a, float)[:, None]
    b = np.asarray(b, float)[:, None]
    half = 0.5 * (b - a)
    r = a + half * (xg[None, :] + 1.0)
    w = half * wg[None, :]
    kp, kl = _stable_kernels(np.asarray(k, float)[:, None], r, kt)
    return -(kp * w).sum(axis=1), -(kl * w).sum(axis=1)


def _interval_factor(k, kt, a, b):
    """Cavity factors of ``h = +1`` on ``a <= r <= b`` (no contact term)."""
    k = np.atleast_1d(np.asarray(k, dtype=float))
    cp = np.zeros(k.shape, complex)
    cl = np.zeros(k.shape, complex)
    if b <= a:
        return cp, cl
    with np.errstate(divide="ignore"):
        split = np.where(k > 0, _CLOSED_FORM_SWITCH / np.where(k > 0, k, 1.0), np.inf)
    split = np.clip(split, a, b)
    near = split > a
    if np.any(near):
        n = 24 + 8 * int(math.ceil(kt * (b - a)))
        n = min(n, 400)
        p, l = _gl_interval(k[near], kt, np.full(near.sum(), a), split[near], n)
        cp[near] += p
        cl[near] += l
    far = split < b
    if np.any(far):
        p, l = _closed_form_interval(k[far], kt, split[far], b)
        cp[far] += p
        cl[far] += l
    return cp, cl


def cavity_factor_realspace(k, geom: CavityGeometry, kind: str, ctx: WaveContext):
    """Cavity factors from the real-space trace integral.

    Parameters
    ----------
    k : float or array_like
        Wavenumbers ``>= 0``.
    geom : CavityGeometry
    kind : {"ball", "shell"}
        ``"ball"`` uses ``h = -1`` for ``r < R0`` (bare cavity of radius R0),
        ``"shell"`` uses ``h = +1`` on ``R0 < r < R1``.

    Returns
    -------
    c_perp, c_par : complex or ndarray
    """
    k_arr = np.asarray(k, dtype=float)
    if np.any(k_arr < 0):
        raise DomainError("k must be non-negative")
    kt = ctx.k_tilde
    if kind in ("ball", BALL):
        cp, cl = _ball_factor(k_arr.ravel(), kt, geom.R0)
    elif kind in ("shell", SHELL):
        if geom.R1 is None:
            raise GeometryError("shell cavity factor needs R1")
        cp, cl = _interval_factor(k_arr.ravel(), kt, geom.R0, geom.R1)
    else:
        raise DomainError(f"unknown cavity kind {kind!r}")
    cp = cp.reshape(k_arr.shape)
    cl = cl.reshape(k_arr.shape)
    if cp.ndim == 0:
        return complex(cp), complex(cl)
    return cp, cl


def _ball_factor(k, kt, R):
    """Bare-cavity factor ``C^R`` (``h = -1`` inside ``R``), contact term included."""
    cp, cl = _interval_factor(k, kt, 0.0, R)
    contact = -1.0 / (3.0 * kt ** 2)
    return -cp + contact, -cl + contact


def ball_cavity_factor(k, R: float, ctx: WaveContext):
    """``C^R_perp, C^R_par`` of an empty ball of radius ``R``."""
    return cavity_factor_realspace(k, CavityGeometry(R), "ball", ctx)


def shell_cavity_factor(k, geom: CavityGeometry, ctx: WaveContext):
    """Shell factor ``C^{R0} - C^{R1}``."""
    return cavity_factor_realspace(k, geom, "shell", ctx)


def correlation_cavity_factor(k, corr: CorrelationFT, ctx: WaveContext):
    """Real-space cavity factors for any ball-built :class:`CorrelationFT`."""
    k = np.atleast_1d(np.asarray(k, dtype=float))
    cp = np.zeros(k.shape, complex)
    cl = np.zeros(k.shape, complex)
    for sign, radius in corr.terms:
        # +ball of radius R is minus the bare-cavity factor
        p, l = _ball_factor(k, ctx.k_tilde, radius)
        cp -= sign * p
        cl -= sign * l
    return cp, cl


def _near_field_f(x):
    """``(i x e^{ix} - expm1(i x)) / x^2``, by series for small ``x``."""
    x = np.asarray(x, dtype=float)
    out = np.empty(x.shape, complex)
    small = x < 0.05
    xs = x[small]
    acc = np.zeros(xs.shape, complex)
    for n in range(2, 14):
        acc += (1j ** n) * (n - 1) / math.factorial(n) * xs ** (n - 2)
    out[small] = acc
    xl = x[~small]
    out[~small] = (1j * xl * np.exp(1j * xl) - np.expm1(1j * xl)) / xl ** 2
    return out


def shell_gamma_first_order(geom: CavityGeometry, ctx: WaveContext):
    """First-order shell contributions to the normalized ``2 gamma_perp`` and ``gamma_par``.

    Per unit ``eps1 - 1``; these are the exact real-space values of the
    normalized k-space integrals of ``Sigma C_shell`` against the free
    propagators, with ``x = kt r`` running over the shell::

        2 gamma_perp = -1/2 int Tr{T(x) G(x)} dx,   gamma_par = -int e^{ix} b(x) / x^2 dx

    where ``T`` is the free dyadic with its static near field removed.
    """
    if geom.R1 is None:
        raise GeometryError("first-order shell terms need R1")
    kt = ctx.k_tilde
    x0, x1 = kt * geom.R0, kt * geom.R1
    if x1 == x0:
        return 0j, 0j
    n_panels = max(1, math.ceil(math.log(x1 / x0) / math.log(1.5)), math.ceil(x1 - x0))
    edges = np.geomspace(x0, x1, n_panels + 1)
    x, w = numerics.panel_rule(edges, order=20)
    e = np.exp(1j * x)
    f = _near_field_f(x)
    t_a = -(e + f)
    t_b = e + 3.0 * f
    # Tr{(t_a I + t_b rr)(g_a I + g_b rr)} with g = -e^{ix}(a, b), using 3a+b = 2
    trace = -2.0 * e * t_a - e * t_b * (2.0 / x ** 2 - 2j / x)
    two_perp = -0.5 * np.dot(w, trace)
    b = -1.0 - 3j / x + 3.0 / x ** 2
    par = -np.dot(w, e * b / x ** 2)
    return complex(two_perp), complex(par)


# ---------------------------------------------------------------------------
# k-space route
# ---------------------------------------------------------------------------

def j1_over_y(y):
    """``j1(y)/y`` with its limit ``1/3`` at the origin."""
    y = np.asarray(y, dtype=float)
    small = np.abs(y) < 1e-3
    ys = np.where(small, 1.0, y)
    out = np.where(small, 1.0 / 3.0 - y ** 2 / 30.0 + y ** 4 / 840.0, spherical_jn(1, ys) / ys)
    return out


def orientation_weights(k, corr: CorrelationFT):
    """``W_c(k), W_s(k)``: volume integrals of ``h`` weighted by ``cos^2`` and ``sin^2``.

    ``W_c(k) = int d3k'/(2pi)^3 h(|k - k'|) cos^2(theta)``; for a ball
    ``+1`` of radius ``R`` this is ``1 - 2 j1(kR)/(kR)`` and
    ``W_s = 2 j1(kR)/(kR)``.
    """
    k = np.asarray(k, dtype=float)
    wc = np.zeros(k.shape)
    ws = np.zeros(k.shape)
    for sign, radius in corr.terms:
        j = j1_over_y(k * radius)
        wc = wc + sign * (1.0 - 2.0 * j)
        ws = ws + sign * 2.0 * j
    return wc, ws


def _ball_antiderivatives(q, R):
    """Antiderivatives of ``q^(2m+1) * ball_ft(q, R)`` for ``m = 0, 1, 2``."""
    qr = q * R
    s = np.sin(qr)
    c = np.cos(qr)
    four_pi = 4.0 * math.pi
    p0 = -four_pi * R * np.sinc(qr / math.pi)
    p1 = -four_pi * (q * s + 2.0 * c / R)
    p2 = four_pi * (-(R ** 3) * q ** 3 * s - 4.0 * R ** 2 * q ** 2 * c
                    + 8.0 * R * q * s + 8.0 * c) / R ** 3
    return p0, p1, p2


def _ball_moments_closed(k, kp, R):
    lo = np.abs(k - kp)
    hi = k + kp
    a0, a1, a2 = _ball_antiderivatives(hi, R)
    b0, b1, b2 = _ball_antiderivatives(lo, R)
    d0, d1, d2 = a0 - b0, a1 - b1, a2 - b2
    kk = k * kp
    s = k ** 2 + kp ** 2
    m0 = d0 / kk
    m2 = (s ** 2 * d0 - 2.0 * s * d1 + d2) / (4.0 * kk ** 3)
    return m0, m2


def _ball_moments_gl(k, kp, R, n):
    xg, wg = numerics.gauss_legendre(n)
    q = np.sqrt(np.maximum(k[:, None] ** 2 + kp[:, None] ** 2
                           - 2.0 * (k * kp)[:, None] * xg[None, :], 0.0))
    from .correlations import ball_indicator_ft
    h = ball_indicator_ft(q, R)
    m0 = (h * wg).sum(axis=1)
    m2 = (h * xg ** 2 * wg).sum(axis=1)
    return m0, m2


def angular_moments(k, kp, corr: CorrelationFT, chunk: int = 200_000):
    """Angular moments ``M0, M2`` of ``h(|k - k'|)`` over ``u = cos(theta)``.

    Broadcasts ``k`` against ``kp``.
    """
    k, kp = np.broadcast_arrays(np.asarray(k, float), np.asarray(kp, float))
    shape = k.shape
    k = k.ravel()
    kp = kp.ravel()
    m0 = np.zeros(k.shape)
    m2 = np.zeros(k.shape)
    lo = np.minimum(k, kp)
    hi = np.maximum(k, kp)
    for sign, R in corr.terms:
        phase = lo * R
        with np.errstate(divide="ignore", invalid="ignore"):
            closed = (phase >= _MOMENT_MIN_PHASE) & (hi <= _MOMENT_MAX_RATIO * lo)
        idx = np.nonzero(closed)[0]
        if idx.size:
            a, b = _ball_moments_closed(k[idx], kp[idx], R)
            m0[idx] += sign * a
            m2[idx] += sign * b
        idx = np.nonzero(~closed)[0]
        if idx.size:
            n = int(min(1024, 32 + 2 * math.ceil(float(phase[idx].max()))))
            step = max(1, chunk // n)
            for start in range(0, idx.size, step):
                sl = idx[start:start + step]
                a, b = _ball_moments_gl(k[sl], kp[sl], R, n)
                m0[sl] += sign * a
                m2[sl] += sign * b
    return m0.reshape(shape), m2.reshape(shape)


def default_k_rule(corr: CorrelationFT, ctx: WaveContext, k_max_factor: float = 2000.0,
                   order: int = 10) -> numerics.PoleRule:
    """Radial rule for convolutions over ``k'`` with the pole at ``k_tilde``."""
    radii = corr.radii or (1.0 / ctx.k_tilde,)
    r_min, r_max = min(radii), max(radii)
    k_max = max(k_max_factor / r_min, 40.0 * ctx.k_tilde)
    return numerics.radial_pole_rule(ctx.k_tilde, r_min, r_max, k_max, order=order)


def cavity_factor_kspace(k, corr: CorrelationFT, ctx: WaveContext,
                         rule: Optional[numerics.PoleRule] = None):
    """Cavity factors from the k-space angular convolution.

    The ``k' = k_tilde`` pole of ``G_perp^0`` is taken by principal value plus
    the outgoing-wave delta term.

    Returns
    -------
    c_perp, c_par : complex or ndarray
    """
    k_arr = np.atleast_1d(np.asarray(k, dtype=float))
    if np.any(k_arr < 0):
        raise DomainError("k must be non-negative")
    if corr.is_zero:
        z = np.zeros(k_arr.shape, complex)
        return (z, z.copy()) if np.ndim(k) else (0j, 0j)
    kt = ctx.k_tilde
    if rule is None:
        rule = default_k_rule(corr, ctx)
    nodes = np.concatenate([rule.nodes, [kt]])
    g_par = 1.0 / kt ** 2
    wc, ws = orientation_weights(k_arr, corr)
    cp = np.empty(k_arr.shape, complex)
    cl = np.empty(k_arr.shape, complex)
    for i, kv in enumerate(k_arr):
        kv_eval = kv if kv > 0 else 1e-300
        m0, m2 = angular_moments(kv_eval, nodes, corr)
        # k'^2 G_perp^0(k') = phi(k') / (k' - kt - i0) with phi = -k'^2/(k'+kt)
        phi = -nodes ** 2 / (nodes + kt)
        fp = phi * (m0 + m2) / (8.0 * math.pi ** 2)
        fl = phi * (m0 - m2) / (4.0 * math.pi ** 2)
        vals = np.stack([fp, fl], axis=1)
        val, _ = rule.integrate(vals[:-1], vals[-1], sign_prescription="-i0", tail_order=2.0)
        cp[i] = val[0] + 0.5 * g_par * ws[i]
        cl[i] = val[1] + g_par * wc[i]
    if np.ndim(k) == 0:
        return complex(cp[0]), complex(cl[0])
    return cp.reshape(np.shape(k)), cl.reshape(np.shape(k))


# ---------------------------------------------------------------------------
# Tables
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GridSpec:
    """Table grid: ``n_core`` points on ``[0, core_factor*kt]`` then ``n_tail``
    log-spaced points to ``tail_factor*kt``, densified so that consecutive
    points are at most ``max_phase_step / R_max`` apart."""

    n_core: int = 48
    n_tail: int = 24
    core_factor: float = 4.0
    tail_factor: float = 40.0
    max_phase_step: float = 0.05
    loo_tol: float = 1e-6

    def grid(self, kt: float, r_max: float) -> np.ndarray:
        k_core = self.core_factor * kt
        k_top = self.tail_factor * kt
        h = self.max_phase_step / r_max if r_max > 0 else np.inf
        n_core = max(self.n_core, int(math.ceil(k_core / h)) + 1)
        core = np.linspace(0.0, k_core, n_core)
        tail = np.geomspace(k_core, k_top, self.n_tail + 1)[1:]
        pts = [core]
        last = k_core
        for t in tail:
            n = max(1, int(math.ceil((t - last) / h)))
            pts.append(np.linspace(last, t, n + 1)[1:])
            last = t
        return np.concatenate(pts)


@dataclass
class CavityFactorTable:
    """Cavity factors sampled on an increasing grid with cubic interpolation."""

    grid: np.ndarray
    c_perp: np.ndarray
    c_par: np.ndarray
    geometry: Optional[CavityGeometry] = None
    kind: str = SHELL
    route: str = REAL_SPACE
    k_tilde: float = 1.0
    loo_error: float = 0.0
    _splines: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        self.grid = np.asarray(self.grid, float)
        self.c_perp = np.asarray(self.c_perp, complex)
        self.c_par = np.asarray(self.c_par, complex)
        if self.grid.ndim != 1 or np.any(np.diff(self.grid) <= 0):
            raise DomainError("grid must be strictly increasing")
        if self.c_perp.shape != self.grid.shape or self.c_par.shape != self.grid.shape:
            raise DomainError("value arrays must match the grid")

    @property
    def k_max(self) -> float:
        return float(self.grid[-1])

    def _spline(self, name):
        if name not in self._splines:
            self._splines[name] = CubicSpline(self.grid, getattr(self, name))
        return self._splines[name]

    def __call__(self, k):
        """Interpolated ``(c_perp, c_par)``; zero beyond the grid end is not assumed."""
        k = np.asarray(k, float)
        if np.any(k < self.grid[0]) or np.any(k > self.grid[-1]):
            raise DomainError("k outside the tabulated range")
        return self._spline("c_perp")(k), self._spline("c_par")(k)

    def to_csv(self, path) -> None:
        """Write the table as UTF-8 CSV with 17 significant digits."""
        with open(path, "w", newline="", encoding="utf-8") as fh:
            fh.write(f"# kind={self.kind} route={self.route} k_tilde={self.k_tilde!r}")
            if self.geometry is not None:
                fh.write(f" R0={self.geometry.R0!r} R1={self.geometry.R1!r}")
            fh.write("\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["k", "re_c_perp", "im_c_perp", "re_c_par", "im_c_par"])
            for k, p, l in zip(self.grid, self.c_perp, self.c_par):
                w.writerow([f"{v:.16e}" for v in (k, p.real, p.imag, l.real, l.imag)])

    @classmethod
    def from_csv(cls, path) -> "CavityFactorTable":
        meta = {}
        rows = []
        with open(path, newline="", encoding="utf-8") as fh:
            first = fh.readline()
            if first.startswith("#"):
                for tok in first[1:].split():
                    key, _, val = tok.partition("=")
                    meta[key] = val
            else:
                fh.seek(0)
            reader = csv.reader(fh)
            header = next(reader)
            if header[:5] != ["k", "re_c_perp", "im_c_perp", "re_c_par", "im_c_par"]:
                raise DomainError(f"unexpected table header {header!r}")
            for row in reader:
                rows.append([float(v) for v in row])
        arr = np.asarray(rows, float).reshape(-1, 5)
        geom = None
        if "R0" in meta:
            r1 = None if meta.get("R1", "None") == "None" else float(meta["R1"])
            geom = CavityGeometry(float(meta["R0"]), r1)
        return cls(arr[:, 0], arr[:, 1] + 1j * arr[:, 2], arr[:, 3] + 1j * arr[:, 4],
                   geometry=geom, kind=meta.get("kind", SHELL),
                   route=meta.get("route", REAL_SPACE),
                   k_tilde=float(meta.get("k_tilde", 1.0)))


def leave_one_out_error(grid, values) -> float:
    """Largest leave-one-out cubic-spline error relative to ``max|values|``."""
    grid = np.asarray(grid, float)
    values = np.asarray(values)
    scale = float(np.max(np.abs(values))) if values.size else 0.0
    if scale == 0.0 or grid.size < 6:
        return 0.0
    worst = 0.0
    idx = np.arange(grid.size)
    for i in range(2, grid.size - 2):
        # a local window keeps this linear in the grid size
        lo, hi = max(0, i - 8), min(grid.size, i + 9)
        keep = idx[lo:hi][idx[lo:hi] != i]
        sp = CubicSpline(grid[keep], values[keep])
        worst = max(worst, abs(sp(grid[i]) - values[i]))
    return worst / scale


def build_cavity_factor_table(geom: CavityGeometry, kind: str, ctx: WaveContext,
                              grid_spec: GridSpec = GridSpec(),
                              check: bool = True) -> CavityFactorTable:
    """Tabulate the cavity factors of ``geom`` on the graded grid of ``grid_spec``.

    Raises
    ------
    GridTooCoarse
        Leave-one-out interpolation error above ``grid_spec.loo_tol``.
    """
    if kind in ("ball", BALL):
        r_max = geom.R0
        kind_tag = BALL
    elif kind in ("shell", SHELL):
        if geom.R1 is None:
            raise GeometryError("shell table needs R1")
        r_max = geom.R1
        kind_tag = SHELL
    else:
        raise DomainError(f"unknown cavity kind {kind!r}")
    grid = grid_spec.grid(ctx.k_tilde, r_max)
    cp, cl = cavity_factor_realspace(grid, geom, kind, ctx)
    table = CavityFactorTable(grid, cp, cl, geom, kind_tag, REAL_SPACE, ctx.k_tilde)
    if check:
        err = max(leave_one_out_error(grid, cp.real), leave_one_out_error(grid, cp.imag),
                  leave_one_out_error(grid, cl.real), leave_one_out_error(grid, cl.imag))
        table.loo_error = err
        if err > grid_spec.loo_tol:
            raise GridTooCoarse(f"leave-one-out error {err:.2e} above {grid_spec.loo_tol:.0e}")
    return table


def zero_table(ctx: WaveContext, grid_spec: GridSpec = GridSpec()) -> CavityFactorTable:
    """Table of an absent correlation hole (all factors zero)."""
    grid = grid_spec.grid(ctx.k_tilde, 0.0)
    z = np.zeros(grid.shape, complex)
    return CavityFactorTable(grid, z, z.copy(), None, "none", REAL_SPACE, ctx.k_tilde)


def correlation_for(geom: CavityGeometry) -> CorrelationFT:
    """Shell correlation for a molecule geometry, cavity correlation otherwise."""
    return shell_correlation(geom) if geom.R1 is not None else cavity_correlation(geom)
