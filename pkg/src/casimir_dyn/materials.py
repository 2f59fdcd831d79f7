"""Dielectric response at imaginary frequency and Fresnel reflection coefficients.

Everything here feeds the fluctuation-force integrand: a mirror is described
by its permittivity evaluated on the imaginary frequency axis, eps(i*xi),
and by the reflection coefficients of the two transverse polarizations for a
vacuum gap.  Bulk half-spaces and single-film stacks (film on substrate) are
supported; the zero-frequency limits needed by the n = 0 Matsubara term are
implemented explicitly instead of being left to 0/0 evaluation.

Conventions: xi is the imaginary frequency in rad/s, k_perp the transverse
wavevector in rad/m, and the vacuum "transverse" momentum is
q = sqrt(k_perp^2 + xi^2/c^2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .constants import C


class TransverseMode(Enum):
    TE = "TE"
    TM = "TM"


@dataclass(frozen=True)
class Drude:
    """Drude metal: eps(i*xi) = 1 + wp^2 / (xi*(xi + gamma)).

    relaxation_rate = 0 gives the lossless (plasma) form, which changes the
    zero-frequency TE behavior qualitatively: a lossless metal keeps a finite
    TE reflection at xi = 0 while any finite relaxation kills it.
    """

    plasma_frequency: float  # rad/s
    relaxation_rate: float = 0.0  # rad/s

    def __post_init__(self):
        if self.plasma_frequency <= 0:
            raise ValueError("plasma_frequency must be > 0")
        if self.relaxation_rate < 0:
            raise ValueError("relaxation_rate must be >= 0")

    def epsilon(self, xi):
        xi = np.asarray(xi, dtype=float)
        if np.any(xi <= 0):
            raise ValueError("Drude permittivity requires xi > 0 (pole at the origin)")
        return 1.0 + self.plasma_frequency**2 / (xi * (xi + self.relaxation_rate))

    # --- zero-frequency limit descriptors (used by the n = 0 Matsubara term) ---

    @property
    def _pole_order(self) -> int:
        # eps ~ strength / xi^order as xi -> 0
        return 1 if self.relaxation_rate > 0 else 2

    @property
    def _pole_strength(self) -> float:
        if self.relaxation_rate > 0:
            return self.plasma_frequency**2 / self.relaxation_rate
        return self.plasma_frequency**2

    def _km_zero(self, kperp):
        # lim_{xi->0} sqrt(eps*xi^2/c^2 + kperp^2)
        if self.relaxation_rate > 0:
            return np.asarray(kperp, dtype=float) + 0.0  # eps*xi^2 -> 0
        return np.sqrt(np.asarray(kperp, dtype=float) ** 2 + (self.plasma_frequency / C) ** 2)


@dataclass(frozen=True)
class Dielectric:
    """Frequency-independent permittivity (e.g. silicon, eps = 11.7)."""

    epsilon_static: float

    def __post_init__(self):
        if self.epsilon_static < 1.0:
            raise ValueError("epsilon_static must be >= 1")

    def epsilon(self, xi):
        xi = np.asarray(xi, dtype=float)
        return np.full_like(xi, self.epsilon_static, dtype=float)

    _pole_order = 0

    @property
    def _pole_strength(self) -> float:
        return self.epsilon_static

    def _km_zero(self, kperp):
        return np.asarray(kperp, dtype=float) + 0.0


@dataclass(frozen=True)
class PerfectConductor:
    """Ideal mirror: r_TM = 1, r_TE = -1 at every frequency.

    A first-class variant (rather than a huge finite epsilon) so the ideal
    closed-form oracles are exact.
    """

    def epsilon(self, xi):
        xi = np.asarray(xi, dtype=float)
        return np.full_like(xi, np.inf, dtype=float)

    _pole_order = 3  # dominates every finite-response medium at xi = 0
    _pole_strength = math.inf

    def _km_zero(self, kperp):
        return np.full_like(np.asarray(kperp, dtype=float), np.inf)


DielectricModel = Drude | Dielectric | PerfectConductor

# handy presets; parameters remain plain configuration inputs
GOLD = Drude(plasma_frequency=1.37e16, relaxation_rate=5.32e13)  # 9.0 eV, 0.035 eV
SILICON = Dielectric(epsilon_static=11.7)
_VACUUM = Dielectric(epsilon_static=1.0)


def permittivity_imag_freq(model: DielectricModel, xi):
    """eps(i*xi), vectorized over xi > 0.  PerfectConductor returns inf."""
    return model.epsilon(xi)


def _fresnel_interface(eps_a, k_a, eps_b, k_b):
    """Both reflection coefficients for a wave in medium a hitting medium b.

    k_a, k_b are the imaginary-frequency decay constants sqrt(eps*xi^2/c^2 +
    k_perp^2) on either side.
    """
    r_tm = (eps_b * k_a - eps_a * k_b) / (eps_b * k_a + eps_a * k_b)
    r_te = (k_a - k_b) / (k_a + k_b)
    return r_tm, r_te


def _interface_zero(model_a: DielectricModel, model_b: DielectricModel, kperp):
    """xi -> 0 limit of _fresnel_interface between media a and b.

    TM: if one side's permittivity diverges faster, its side wins the limit;
    equal divergence rates reduce to a ratio of the pole strengths.
    TE: controlled entirely by the limiting decay constants (only a lossless
    metal keeps one different from k_perp).
    """
    kperp = np.asarray(kperp, dtype=float)
    ka0 = model_a._km_zero(kperp)
    kb0 = model_b._km_zero(kperp)
    oa, ob = model_a._pole_order, model_b._pole_order
    if ob > oa:
        r_tm = np.ones_like(kperp)
    elif oa > ob:
        r_tm = -np.ones_like(kperp)
    else:
        sa, sb = model_a._pole_strength, model_b._pole_strength
        r_tm = (sb * ka0 - sa * kb0) / (sb * ka0 + sa * kb0)
    if isinstance(model_b, PerfectConductor):
        r_te = -np.ones_like(kperp)
    elif isinstance(model_a, PerfectConductor):
        r_te = np.ones_like(kperp)
    else:
        r_te = (ka0 - kb0) / (ka0 + kb0)
    return r_tm, r_te


def _bulk_both(model: DielectricModel, xi, kperp):
    """(r_TM, r_TE) of a half-space; xi may be 0 (limit values) or > 0 arrays."""
    if isinstance(model, PerfectConductor):
        kperp = np.asarray(kperp, dtype=float)
        shape = np.broadcast(kperp, np.asarray(xi, dtype=float)).shape
        return np.ones(shape), -np.ones(shape)
    if np.isscalar(xi) and xi == 0.0:
        return _interface_zero(_VACUUM, model, kperp)
    xi = np.asarray(xi, dtype=float)
    kperp = np.asarray(kperp, dtype=float)
    eps = model.epsilon(xi)
    q = np.sqrt(kperp**2 + (xi / C) ** 2)
    km = np.sqrt(eps * (xi / C) ** 2 + kperp**2)
    return _fresnel_interface(1.0, q, eps, km)


@dataclass(frozen=True)
class MirrorStack:
    """A mirror: either a bulk half-space or a single film on a substrate."""

    film: DielectricModel
    film_thickness: float = math.inf  # m; inf means bulk
    substrate: DielectricModel | None = None

    def __post_init__(self):
        if not self.film_thickness > 0:
            raise ValueError("film_thickness must be > 0 (use inf for bulk)")
        if math.isfinite(self.film_thickness) and self.substrate is None:
            raise ValueError("finite film_thickness requires a substrate")

    @classmethod
    def bulk(cls, model: DielectricModel) -> "MirrorStack":
        return cls(film=model)

    def reflection(self, xi, kperp):
        """(r_TM, r_TE), vectorized; xi == 0 (scalar) returns the limit values."""
        if not math.isfinite(self.film_thickness):
            return _bulk_both(self.film, xi, kperp)
        if isinstance(self.film, PerfectConductor):
            # zero skin depth: thickness irrelevant
            return _bulk_both(self.film, xi, kperp)
        if np.isscalar(xi) and xi == 0.0:
            r01 = _interface_zero(_VACUUM, self.film, kperp)
            r12 = _interface_zero(self.film, self.substrate, kperp)
            kf = self.film._km_zero(kperp)
        else:
            xi = np.asarray(xi, dtype=float)
            kperp = np.asarray(kperp, dtype=float)
            eps_f = self.film.epsilon(xi)
            q = np.sqrt(kperp**2 + (xi / C) ** 2)
            kf = np.sqrt(eps_f * (xi / C) ** 2 + kperp**2)
            r01 = _fresnel_interface(1.0, q, eps_f, kf)
            if isinstance(self.substrate, PerfectConductor):
                r12 = (np.ones_like(kf), -np.ones_like(kf))
            else:
                eps_s = self.substrate.epsilon(xi)
                ks = np.sqrt(eps_s * (xi / C) ** 2 + kperp**2)
                r12 = _fresnel_interface(eps_f, kf, eps_s, ks)
        decay = np.exp(-2.0 * kf * self.film_thickness)
        out = []
        for a, b in zip(r01, r12):
            out.append((a + b * decay) / (1.0 + a * b * decay))
        return tuple(out)


def bulk_reflection(model: DielectricModel, xi, kperp, mode: TransverseMode):
    """Fresnel coefficient of a half-space at imaginary frequency.

    r_TM = (eps*q - k_m)/(eps*q + k_m), r_TE = (q - k_m)/(q + k_m) with
    k_m = sqrt(eps*xi^2/c^2 + k_perp^2).  xi = 0 returns the limit value.
    """
    _check_reflection_args(xi, kperp)
    r_tm, r_te = _bulk_both(model, xi, kperp)
    return r_tm if mode is TransverseMode.TM else r_te


def layered_reflection(stack: MirrorStack, xi, kperp, mode: TransverseMode):
    """Two-interface recursion r = (r01 + r12 e^{-2 k_f t})/(1 + r01 r12 e^{-2 k_f t})."""
    _check_reflection_args(xi, kperp)
    r_tm, r_te = stack.reflection(xi, kperp)
    return r_tm if mode is TransverseMode.TM else r_te


def _check_reflection_args(xi, kperp):
    if np.any(np.asarray(xi) < 0) or np.any(np.asarray(kperp) < 0):
        raise ValueError("xi and k_perp must be >= 0")
    if np.isscalar(xi) and np.isscalar(kperp) and xi == 0 and kperp == 0:
        raise ValueError("xi and k_perp may not both be zero")
