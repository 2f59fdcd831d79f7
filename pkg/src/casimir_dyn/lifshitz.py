"""Fluctuation-induced energy per area, sphere-plate force, and force field.

The zero-temperature energy per unit area of two plane mirrors separated by x
is the double integral over transverse wavevector k_perp and imaginary
frequency xi of

    ln[1 - r1_TM r2_TM e^{-2xq}] + ln[1 - r1_TE r2_TE e^{-2xq}],

q = sqrt(k_perp^2 + xi^2/c^2), with prefactor hbar/(4 pi^2).  At finite
temperature the xi integral becomes the Matsubara sum over xi_n = 2 pi n k_B
T / hbar (prefactor k_B T / 2 pi, n = 0 counted half) and the n = 0 term uses
the explicit xi -> 0 reflection limits from `materials`.

The sphere-plate force follows from the proximity-force approximation
F(x) = 2 pi R E(x); with E < 0 this gives the attractive F < 0.  Sign
convention used throughout: F < 0, dF/dx > 0, d2F/dx2 < 0.

For dynamics the force is sampled on a log-spaced grid once and interpolated:
a cubic spline of ln(-F) against ln(x) is essentially polynomial (F ~ x^-n),
giving ~1e-10 relative interpolation error at a few hundred nodes.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field as dataclass_field
from functools import lru_cache

import numpy as np
from scipy.interpolate import CubicSpline

from .constants import C, HBAR, KB
from .materials import Dielectric, Drude, MirrorStack, PerfectConductor

__all__ = [
    "Geometry",
    "QuadratureSpec",
    "ThermalSetting",
    "CasimirField",
    "QuadratureError",
    "FieldRangeError",
    "energy_per_area_T0",
    "energy_per_area_finite_T",
    "pfa_force",
    "ideal_energy",
    "ideal_force",
    "build_field",
    "force_gradient_over_R",
]


class QuadratureError(RuntimeError):
    """Raised when the integral fails to converge; carries the last estimate."""

    def __init__(self, message: str, estimate: float):
        super().__init__(message)
        self.estimate = estimate


class FieldRangeError(ValueError):
    """Separation outside the tabulated force-field grid."""


@dataclass(frozen=True)
class Geometry:
    sphere_radius: float  # m
    separation: float  # m

    def __post_init__(self):
        if self.sphere_radius <= 0 or self.separation <= 0:
            raise ValueError("sphere_radius and separation must be > 0")
        if self.separation / self.sphere_radius > 0.1:
            warnings.warn(
                "x/R = %.3g > 0.1: proximity-force approximation degrades"
                % (self.separation / self.sphere_radius),
                stacklevel=2,
            )


@dataclass(frozen=True)
class QuadratureSpec:
    relative_tolerance: float = 1e-4
    max_subdivisions: int = 256  # Gauss-Legendre nodes per axis at the last doubling
    xi_scale: float | None = None  # rad/s; default c/x

    def __post_init__(self):
        if not 0 < self.relative_tolerance < 1e-2:
            raise ValueError("relative_tolerance must be in (0, 1e-2)")
        if self.max_subdivisions < 16:
            raise ValueError("max_subdivisions must be >= 16")


@dataclass(frozen=True)
class ThermalSetting:
    temperature: float  # K
    matsubara_terms: int | None = None  # None: auto from exp(-2xq) decay

    def __post_init__(self):
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")


DEFAULT_QUAD = QuadratureSpec()


@lru_cache(maxsize=16)
def _gl_nodes(n: int):
    """Gauss-Legendre nodes/weights mapped to (0, 1)."""
    nodes, weights = np.polynomial.legendre.leggauss(n)
    return 0.5 * (nodes + 1.0), 0.5 * weights


def _as_stack(m) -> MirrorStack:
    return m if isinstance(m, MirrorStack) else MirrorStack.bulk(m)


def _pair(mirrors) -> tuple[MirrorStack, MirrorStack]:
    """Accept a single stack/material or a pair; bare materials mean bulk."""
    if isinstance(mirrors, (MirrorStack, PerfectConductor, Drude, Dielectric)):
        m = _as_stack(mirrors)
        return m, m
    m1, m2 = mirrors
    return _as_stack(m1), _as_stack(m2)


def _t0_fixed_order(mirror1, mirror2, x, n, xi_scale):
    """One tensor-grid evaluation of the T = 0 double integral.

    Substitutions xi = s*u/(1-u) and k_perp = (1/x)*v/(1-v) compactify both
    axes; with s = c/x the integrand's e^{-2xq} decay keeps the node count
    flat across separations.
    """
    u, w = _gl_nodes(n)
    U, V = np.meshgrid(u, u, indexing="ij")
    WU, WV = np.meshgrid(w, w, indexing="ij")
    s = xi_scale if xi_scale is not None else C / x
    xi = s * U / (1.0 - U)
    kp = (1.0 / x) * V / (1.0 - V)
    jac = (s / (1.0 - U) ** 2) * (1.0 / x / (1.0 - V) ** 2)
    q = np.sqrt(kp**2 + (xi / C) ** 2)
    expf = np.exp(-2.0 * x * q)
    r1_tm, r1_te = mirror1.reflection(xi, kp)
    r2_tm, r2_te = mirror2.reflection(xi, kp)
    integrand = kp * (np.log1p(-r1_tm * r2_tm * expf) + np.log1p(-r1_te * r2_te * expf))
    return HBAR / (4.0 * math.pi**2) * float(np.sum(WU * WV * integrand * jac))


def energy_per_area_T0(mirror1, mirror2, x: float, quad: QuadratureSpec = DEFAULT_QUAD) -> float:
    """Zero-temperature energy per unit area (J/m^2), E(x) < 0.

    Gauss-Legendre order is doubled until two successive estimates agree to
    quad.relative_tolerance.
    """
    if x <= 0:
        raise ValueError("separation must be > 0")
    mirror1, mirror2 = _pair((mirror1, mirror2))
    n = 16
    prev = _t0_fixed_order(mirror1, mirror2, x, n, quad.xi_scale)
    while 2 * n <= quad.max_subdivisions:
        n *= 2
        cur = _t0_fixed_order(mirror1, mirror2, x, n, quad.xi_scale)
        if abs(cur - prev) <= quad.relative_tolerance * abs(cur):
            return cur
        prev = cur
    raise QuadratureError(
        f"T=0 quadrature did not reach rtol={quad.relative_tolerance:g} "
        f"within {quad.max_subdivisions} nodes/axis",
        estimate=prev,
    )


def _matsubara_fixed_order(mirror1, mirror2, x, T, nmax, n):
    u, w = _gl_nodes(n)
    kp = (1.0 / x) * u / (1.0 - u)
    jac = 1.0 / x / (1.0 - u) ** 2
    xi1 = 2.0 * math.pi * KB * T / HBAR

    # n = 0: half weight, explicit zero-frequency reflection limits
    r1_tm0, r1_te0 = mirror1.reflection(0.0, kp)
    r2_tm0, r2_te0 = mirror2.reflection(0.0, kp)
    e0 = np.exp(-2.0 * x * kp)
    total = 0.5 * float(
        np.sum(w * kp * (np.log1p(-r1_tm0 * r2_tm0 * e0) + np.log1p(-r1_te0 * r2_te0 * e0)) * jac)
    )

    ns = np.arange(1, nmax + 1)
    XI, KP = np.meshgrid(xi1 * ns, kp, indexing="ij")
    W = np.broadcast_to(w, KP.shape)
    JAC = np.broadcast_to(jac, KP.shape)
    q = np.sqrt(KP**2 + (XI / C) ** 2)
    expf = np.exp(-2.0 * x * q)
    r1_tm, r1_te = mirror1.reflection(XI, KP)
    r2_tm, r2_te = mirror2.reflection(XI, KP)
    total += float(
        np.sum(W * KP * (np.log1p(-r1_tm * r2_tm * expf) + np.log1p(-r1_te * r2_te * expf)) * JAC)
    )
    return KB * T / (2.0 * math.pi) * total


def matsubara_cutoff(x: float, T: float) -> int:
    """Terms needed for the e^{-2 x xi_n / c} tail to be ~e^-10."""
    xi1 = 2.0 * math.pi * KB * T / HBAR
    return int(math.ceil(10.0 * C / (x * xi1))) + 5


def energy_per_area_finite_T(
    mirror1,
    mirror2,
    x: float,
    thermal: ThermalSetting,
    quad: QuadratureSpec = DEFAULT_QUAD,
) -> float:
    """Finite-temperature energy per unit area via the Matsubara sum (J/m^2)."""
    if x <= 0:
        raise ValueError("separation must be > 0")
    if thermal.temperature == 0.0:
        return energy_per_area_T0(mirror1, mirror2, x, quad)
    mirror1, mirror2 = _pair((mirror1, mirror2))
    nmax = thermal.matsubara_terms or matsubara_cutoff(x, thermal.temperature)
    n = 16
    prev = _matsubara_fixed_order(mirror1, mirror2, x, thermal.temperature, nmax, n)
    while 2 * n <= quad.max_subdivisions:
        n *= 2
        cur = _matsubara_fixed_order(mirror1, mirror2, x, thermal.temperature, nmax, n)
        if abs(cur - prev) <= quad.relative_tolerance * abs(cur):
            return cur
        prev = cur
    raise QuadratureError(
        f"Matsubara quadrature did not reach rtol={quad.relative_tolerance:g}",
        estimate=prev,
    )


def ideal_energy(x: float) -> float:
    """Closed-form perfect-mirror energy per area, -pi^2 hbar c / (720 x^3)."""
    return -(math.pi**2) * HBAR * C / (720.0 * x**3)


def ideal_force(geometry: Geometry) -> float:
    """Closed-form sphere-plate force for perfect mirrors, -pi^3 hbar c R / (360 x^3)."""
    return -(math.pi**3) * HBAR * C * geometry.sphere_radius / (360.0 * geometry.separation**3)


def pfa_force(
    geometry: Geometry,
    mirrors,
    thermal: ThermalSetting | None = None,
    quad: QuadratureSpec = DEFAULT_QUAD,
) -> float:
    """Sphere-plate force F = 2 pi R E(x, T) in N; attractive (F < 0)."""
    m1, m2 = _pair(mirrors)
    if thermal is None or thermal.temperature == 0.0:
        e = energy_per_area_T0(m1, m2, geometry.separation, quad)
    else:
        e = energy_per_area_finite_T(m1, m2, geometry.separation, thermal, quad)
    return 2.0 * math.pi * geometry.sphere_radius * e


@dataclass(frozen=True)
class CasimirField:
    """Sphere-plate force sampled on a log grid with spline derivatives.

    The interpolant is a cubic spline of s(u) = ln(-F) over u = ln(x);
    derivatives follow by the chain rule:

        F      = -e^{s}
        dF/dx  = F s' / x
        d2F/dx2 = F (s'^2 + s'' - s') / x^2
    """

    x_grid: np.ndarray  # m
    force: np.ndarray  # N, all < 0
    dforce: np.ndarray  # N/m at the grid nodes
    d2force: np.ndarray  # N/m^2 at the grid nodes
    sphere_radius: float
    temperature: float
    _spline: CubicSpline = dataclass_field(repr=False, compare=False, default=None)

    def _check_range(self, x):
        x = np.asarray(x, dtype=float)
        lo, hi = self.x_grid[0], self.x_grid[-1]
        # ulp-level slop: "30 nm" can parse one rounding step on either side
        # of the grid endpoint depending on how it was computed
        if np.any(x < lo - 4 * np.spacing(lo)) or np.any(x > hi + 4 * np.spacing(hi)):
            raise FieldRangeError(
                f"separation outside field grid [{lo:.3g}, {hi:.3g}] m"
            )
        return np.clip(x, lo, hi)

    def force_at(self, x):
        x = self._check_range(x)
        return -np.exp(self._spline(np.log(x)))

    def gradient_at(self, x):
        x = self._check_range(x)
        u = np.log(x)
        return -np.exp(self._spline(u)) * self._spline(u, 1) / x

    def curvature_at(self, x):
        x = self._check_range(x)
        u = np.log(x)
        sp = self._spline(u, 1)
        spp = self._spline(u, 2)
        return -np.exp(self._spline(u)) / x**2 * (sp * sp + spp - sp)

    def potential_at(self, x, n_sub: int = 64):
        """Potential energy U(x) with U(x_max) = 0; F = -dU/dx.

        Composite Simpson integration of the spline force on a log grid;
        used by energy-bookkeeping diagnostics, not by the integrator.
        """
        x = self._check_range(x)
        scalar = np.isscalar(x) or x.ndim == 0
        xv = np.atleast_1d(x)
        out = np.empty_like(xv)
        for i, xi in enumerate(xv):
            if xi == self.x_grid[-1]:
                out[i] = 0.0
                continue
            grid = np.geomspace(xi, self.x_grid[-1], 2 * n_sub + 1)
            f = self.force_at(grid)
            # U(x) = + int_x^{xmax} F dx'  (so that -dU/dx = F)
            h = np.diff(grid)
            # Simpson on non-uniform pairs
            acc = 0.0
            for j in range(0, len(grid) - 2, 2):
                h0, h1 = h[j], h[j + 1]
                acc += (
                    (h0 + h1)
                    / 6.0
                    * (
                        f[j] * (2.0 - h1 / h0)
                        + f[j + 1] * (h0 + h1) ** 2 / (h0 * h1)
                        + f[j + 2] * (2.0 - h0 / h1)
                    )
                )
            out[i] = acc
        return float(out[0]) if scalar else out

    def gradient_over_R(self, x):
        return self.gradient_at(x) / self.sphere_radius

    def spline_arrays(self):
        """Breakpoints (ln x) and polynomial coefficients for njit evaluation.

        Returns (u_knots, c3, c2, c1, c0): segment i covers
        u_knots[i]..u_knots[i+1] and ln(-F) = ((c3*t + c2)*t + c1)*t + c0
        with t = u - u_knots[i].
        """
        c = self._spline.c
        return self._spline.x, c[0], c[1], c[2], c[3]


def build_field(
    mirrors,
    sphere_radius: float,
    temperature: float,
    x_min: float,
    x_max: float,
    n_points: int = 240,
    quad: QuadratureSpec = DEFAULT_QUAD,
    verify_derivatives: bool = True,
) -> CasimirField:
    """Sample the PFA force on a log grid and package it with derivatives.

    The spline's first and second derivatives are cross-checked against
    central finite differences of the direct quadrature at 5 interior points
    (1% / 3% tolerances), and interpolation error is spot-checked at grid
    midpoints (<1e-3 relative).
    """
    if n_points < 200:
        raise ValueError("force-field grid needs >= 200 log-spaced points")
    if not 0 < x_min < x_max:
        raise ValueError("require 0 < x_min < x_max")
    m1, m2 = _pair(mirrors)
    thermal = ThermalSetting(temperature)
    xs = np.geomspace(x_min, x_max, n_points)
    # geomspace endpoints can land 1 ulp off the request; pin them so the
    # advertised range is exactly covered
    xs[0], xs[-1] = x_min, x_max

    def direct_force(x):
        return pfa_force(Geometry(sphere_radius, x), (m1, m2), thermal, quad)

    with warnings.catch_warnings():
        # PFA-validity warning is per-geometry; a wide grid triggers it once at most
        warnings.simplefilter("once")
        F = np.array([direct_force(x) for x in xs])
    if not np.all(F < 0):
        raise RuntimeError("force field must be attractive (F < 0) on the whole grid")
    spline = CubicSpline(np.log(xs), np.log(-F))
    u = np.log(xs)
    sp = spline(u, 1)
    spp = spline(u, 2)
    dF = F * sp / xs
    d2F = F / xs**2 * (sp * sp + spp - sp)
    if not (np.all(dF > 0) and np.all(d2F < 0)):
        raise RuntimeError("force field derivative sign convention violated")
    fld = CasimirField(
        x_grid=xs,
        force=F,
        dforce=dF,
        d2force=d2F,
        sphere_radius=sphere_radius,
        temperature=temperature,
        _spline=spline,
    )

    # spot checks against direct quadrature
    probe_idx = np.linspace(5, n_points - 6, 5).astype(int)
    mid = np.sqrt(xs[probe_idx] * xs[probe_idx + 1])
    for x in mid[:3]:
        direct = direct_force(float(x))
        if abs(fld.force_at(x) / direct - 1.0) > 1e-3:
            raise RuntimeError("field interpolation error exceeds 1e-3 at grid midpoint")
    if verify_derivatives:
        # 5-point stencils at h = 5% x: wide enough that the quadrature's
        # 1e-4 relative noise stays below the 1% / 3% contracts, 4th-order
        # so the truncation error is negligible at that width.
        for x in xs[probe_idx]:
            h = 0.05 * x
            f_m2, f_m1, f_0, f_p1, f_p2 = (direct_force(x + k * h) for k in (-2, -1, 0, 1, 2))
            fp = (f_m2 - 8 * f_m1 + 8 * f_p1 - f_p2) / (12 * h)
            fpp = (-f_m2 + 16 * f_m1 - 30 * f_0 + 16 * f_p1 - f_p2) / (12 * h**2)
            if abs(fld.gradient_at(x) / fp - 1.0) > 0.01:
                raise RuntimeError("field dF/dx deviates >1% from direct quadrature")
            if abs(fld.curvature_at(x) / fpp - 1.0) > 0.03:
                raise RuntimeError("field d2F/dx2 deviates >3% from direct quadrature")
    return fld


def force_gradient_over_R(
    x: float,
    mirrors,
    thermal: ThermalSetting | None = None,
    quad: QuadratureSpec = DEFAULT_QUAD,
) -> float:
    """(dF/dx)/R in N/m per m; R-independent and positive for attraction.

    Computed as 2 pi dE/dx by a 5-point central stencil on the energy.
    """
    h = 0.01 * x

    def e(xx):
        if thermal is None or thermal.temperature == 0.0:
            return energy_per_area_T0(*_pair(mirrors), xx, quad)
        return energy_per_area_finite_T(*_pair(mirrors), xx, thermal, quad)

    de = (e(x - 2 * h) - 8 * e(x - h) + 8 * e(x + h) - e(x + 2 * h)) / (12 * h)
    return 2.0 * math.pi * de


def thermal_fraction(mirrors, x: float, temperature: float, quad: QuadratureSpec = DEFAULT_QUAD) -> float:
    """|E(x,T) - E(x,0)| / |E(x,T)|, the thermal share of the energy."""
    m1, m2 = _pair(mirrors)
    e0 = energy_per_area_T0(m1, m2, x, quad)
    eT = energy_per_area_finite_T(m1, m2, x, ThermalSetting(temperature), quad)
    return abs(eT - e0) / abs(eT)
