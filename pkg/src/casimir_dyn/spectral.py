"""Two-mode non-Hermitian Hamiltonian: coupling map, eigenvalues, EP location.

In the frame rotating with the modulation, the slowly varying amplitudes obey
i dc/dt = H c with

    H = [[-i g1/2,      g/2     ],
         [  g/2,   -delta - i g2/2]]

where g is the parametric coupling produced by modulating the gap at
frequency f_mod with amplitude delta_d,

    g = |d2F/dx2| * delta_d / (2 sqrt(m1 m2 w1 w2)),

and delta = 2 pi (f_mod - f21_eff) is the detuning from the (softened)
difference frequency.  The eigenvalue pair coalesces at delta = 0,
g = |g1 - g2|/2 - the exceptional point - and carrying one branch
continuously around that point in parameter space exchanges the branches.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .lifshitz import CasimirField
from .mechanics import Cantilever, SystemConfig, shifted_frequency

__all__ = [
    "EffectiveHamiltonian",
    "EigenPair",
    "CouplingMap",
    "coupling_from_modulation",
    "detuning",
    "eigenvalues",
    "ep_locate",
    "surface_grid",
    "min_gap_over_points",
    "min_gap_along_path",
    "transport_branches",
]


@dataclass(frozen=True)
class EffectiveHamiltonian:
    gamma1: float  # rad/s
    gamma2: float  # rad/s
    g: float  # rad/s, coupling (phase absorbed, >= 0)
    delta: float  # rad/s, detuning 2 pi (f_mod - f21_eff)

    def __post_init__(self):
        if self.gamma1 < 0 or self.gamma2 < 0 or self.g < 0:
            raise ValueError("gamma1, gamma2, g must be >= 0")

    def matrix(self) -> np.ndarray:
        return np.array(
            [
                [-0.5j * self.gamma1, 0.5 * self.g],
                [0.5 * self.g, -self.delta - 0.5j * self.gamma2],
            ],
            dtype=complex,
        )


@dataclass(frozen=True)
class EigenPair:
    lam_plus: complex  # rad/s
    lam_minus: complex
    vec_plus: np.ndarray
    vec_minus: np.ndarray

    @property
    def gap(self) -> float:
        return abs(self.lam_plus - self.lam_minus)


def coupling_from_modulation(curvature, delta_d, m1, m2, omega1, omega2):
    """g = |d2F/dx2| delta_d / (2 sqrt(m1 m2 w1 w2)), rad/s; linear in delta_d."""
    return abs(curvature) * delta_d / (2.0 * math.sqrt(m1 * m2 * omega1 * omega2))


def detuning(f_mod, f21_effective):
    """delta = 2 pi (f_mod - f21_eff) in rad/s."""
    return 2.0 * math.pi * (np.asarray(f_mod, dtype=float) - f21_effective)


def _eigvec(lam: complex, h: EffectiveHamiltonian) -> np.ndarray:
    # (H - lam) v = 0 for the symmetric 2x2, from either row:
    #   row 1: v ~ (g/2, lam - H00)      row 2: v ~ (lam - H11, g/2)
    # lam carries an absolute error ~eps*||H||, so the row whose diagonal
    # difference is larger is the well-conditioned choice; always using one
    # row loses ~|H00 - H11|/g digits on the branch pinned to that diagonal.
    d1 = lam + 0.5j * h.gamma1
    d2 = lam + h.delta + 0.5j * h.gamma2
    a = 0.5 * h.g
    v = np.array([a, d1] if abs(d1) >= abs(d2) else [d2, a], dtype=complex)
    if abs(v[0]) < 1e-300 and abs(v[1]) < 1e-300:
        v = np.array([1.0 + 0.0j, 0.0j])
    return v / np.linalg.norm(v)


def eigenvalues(h: EffectiveHamiltonian) -> EigenPair:
    """Closed-form eigenvalue pair.

    lam+- = -delta/2 - i(g1+g2)/4 +- (1/2) sqrt(-(g1-g2)^2/4 + delta^2 + g^2
            - i (g1-g2) delta)
    """
    dg = h.gamma1 - h.gamma2
    radicand = complex(-0.25 * dg * dg + h.delta * h.delta + h.g * h.g, -dg * h.delta)
    root = cmath.sqrt(radicand)
    base = -0.5 * h.delta - 0.25j * (h.gamma1 + h.gamma2)
    lp = base + 0.5 * root
    lm = base - 0.5 * root
    return EigenPair(lp, lm, _eigvec(lp, h), _eigvec(lm, h))


@dataclass(frozen=True)
class CouplingMap:
    """Everything needed to map (f_mod, delta_d) to (g, delta)."""

    curvature: float  # N/m^2 at the working gap
    m1: float
    m2: float
    omega1: float
    omega2: float
    f21_eff: float  # Hz, softened difference frequency

    @classmethod
    def from_field(cls, field: CasimirField, config: SystemConfig) -> "CouplingMap":
        c1, c2 = config.cantilever1, config.cantilever2
        w1 = shifted_frequency(c1, field, config.equilibrium_gap)
        w2 = shifted_frequency(c2, field, config.equilibrium_gap)
        return cls(
            curvature=float(field.curvature_at(config.equilibrium_gap)),
            m1=c1.mass,
            m2=c2.mass,
            omega1=c1.omega,
            omega2=c2.omega,
            f21_eff=(w2 - w1) / (2.0 * math.pi),
        )

    def g(self, delta_d):
        return coupling_from_modulation(
            self.curvature, delta_d, self.m1, self.m2, self.omega1, self.omega2
        )

    def delta(self, f_mod):
        return detuning(f_mod, self.f21_eff)

    def hamiltonian(self, gamma1, gamma2, f_mod, delta_d) -> EffectiveHamiltonian:
        return EffectiveHamiltonian(
            gamma1=gamma1, gamma2=gamma2, g=float(self.g(delta_d)), delta=float(self.delta(f_mod))
        )


def ep_locate(gamma1, gamma2, field: CasimirField, d0, m1, m2, omega1, omega2):
    """Exceptional-point coordinates (delta_d*, f_mod*).

    delta_d* solves g(delta_d*) = |gamma1 - gamma2| / 2; f_mod* is the
    softened difference frequency at d0.
    """
    curvature = float(field.curvature_at(d0))
    if curvature == 0.0:
        raise ValueError("force curvature vanishes at d0: EP condition is singular")
    delta_d_star = (
        abs(gamma1 - gamma2) * math.sqrt(m1 * m2 * omega1 * omega2) / abs(curvature)
    )
    w1 = shifted_frequency(Cantilever(m1, omega1, max(gamma1, 1e-12)), field, d0)
    w2 = shifted_frequency(Cantilever(m2, omega2, max(gamma2, 1e-12)), field, d0)
    return delta_d_star, (w2 - w1) / (2.0 * math.pi)


def surface_grid(gamma1, gamma2, f_mod_grid, delta_d_grid, cmap: CouplingMap):
    """Branch-continuous eigenvalue surfaces over the (f_mod, delta_d) plane.

    Returns (lam_plus, lam_minus) arrays of shape (len(f_mod_grid),
    len(delta_d_grid)).  Each delta_d column is labeled by walking f_mod in
    ascending order and keeping the branch that moved least (analytic
    continuation); the "+" branch is the +sqrt branch at the column start.
    """
    f_mod_grid = np.asarray(f_mod_grid, dtype=float)
    delta_d_grid = np.asarray(delta_d_grid, dtype=float)
    lam_p = np.empty((len(f_mod_grid), len(delta_d_grid)), dtype=complex)
    lam_m = np.empty_like(lam_p)
    for j, dd in enumerate(delta_d_grid):
        prev_p = prev_m = None
        for i, fm in enumerate(f_mod_grid):
            pair = eigenvalues(cmap.hamiltonian(gamma1, gamma2, fm, dd))
            a, b = pair.lam_plus, pair.lam_minus
            if prev_p is not None:
                if abs(a - prev_p) + abs(b - prev_m) > abs(b - prev_p) + abs(a - prev_m):
                    a, b = b, a
            lam_p[i, j] = a
            lam_m[i, j] = b
            prev_p, prev_m = a, b
    return lam_p, lam_m


def transport_branches(hamiltonians) -> bool:
    """Carry the eigenvalue pair continuously along a closed parameter path.

    Returns True when the branches come back exchanged (the path encircles
    the exceptional point), False when each returns to itself.
    """
    hams = list(hamiltonians)
    start = eigenvalues(hams[0])
    cur_p, cur_m = start.lam_plus, start.lam_minus
    for h in hams[1:]:
        pair = eigenvalues(h)
        a, b = pair.lam_plus, pair.lam_minus
        if abs(a - cur_p) + abs(b - cur_m) > abs(b - cur_p) + abs(a - cur_m):
            a, b = b, a
        cur_p, cur_m = a, b
    return abs(cur_p - start.lam_minus) < abs(cur_p - start.lam_plus)


def min_gap_over_points(f_points, d_points, gamma1, gamma2, cmap: CouplingMap) -> float:
    """min |lam+ - lam-| over a sampled (f_mod, delta_d) path."""
    gap = math.inf
    for fm, dd in zip(np.asarray(f_points, dtype=float), np.asarray(d_points, dtype=float)):
        pair = eigenvalues(cmap.hamiltonian(gamma1, gamma2, fm, dd))
        gap = min(gap, pair.gap)
    return gap


def min_gap_along_path(loop, gamma1, gamma2, cmap: CouplingMap, n: int = 801) -> float:
    """Minimum eigenvalue gap along a control loop's parameter path.

    `loop` only needs a sample(n) method returning (f_mod, delta_d) arrays.
    """
    f_points, d_points = loop.sample(n)
    return min_gap_over_points(f_points, d_points, gamma1, gamma2, cmap)
