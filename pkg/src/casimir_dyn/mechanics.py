"""Nonlinear dynamics of two cantilevers coupled through an attractive gap force.

The equations of motion are integrated exactly (no rotating-wave or
linearized-coupling step):

    m1 x1'' + m1 g1 x1' + k1 x1 = +F(x(t)) + F_drive,1(t) + F_noise,1(t)
    m2 x2'' + m2 g2 x2' + k2 x2 = -F(x(t)) + F_drive,2(t) + F_noise,2(t)
    x(t) = d0 + delta_d(t) cos(phi(t)) + x1 - x2

with F the interpolated sphere-plate force and phi the exact integral of the
piecewise-linear modulation frequency.  Separation modulation at the
difference of the two (shifted) resonances parametrically couples the modes.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import _integrator
from .constants import KB
from .lifshitz import CasimirField, FieldRangeError

__all__ = [
    "Cantilever",
    "SystemConfig",
    "ModulationSchedule",
    "DriveSignal",
    "Trajectory",
    "ContactError",
    "SnapInError",
    "simulate",
    "shifted_frequency",
    "demodulated_energies",
    "estimate_effective_params",
    "drive_for_amplitude",
]


class ContactError(RuntimeError):
    """Gap collapsed below the force grid: surfaces about to touch."""

    def __init__(self, t_fail: float, gap_floor: float):
        super().__init__(
            f"gap fell below the force-grid floor ({gap_floor * 1e9:.1f} nm) at t = {t_fail * 1e3:.3f} ms"
        )
        self.t_fail = t_fail


class SnapInError(ValueError):
    """Force gradient exceeds the spring stiffness: no stable equilibrium."""


@dataclass(frozen=True)
class Cantilever:
    mass: float  # kg
    omega: float  # rad/s, natural (far-field) angular frequency
    gamma: float  # rad/s, energy damping rate

    def __post_init__(self):
        if min(self.mass, self.omega, self.gamma) <= 0:
            raise ValueError("mass, omega, gamma must all be > 0")
        if self.gamma / self.omega > 1e-2:
            warnings.warn("gamma/omega > 1e-2: underdamped-mode assumptions degrade", stacklevel=2)

    @property
    def stiffness(self) -> float:
        return self.mass * self.omega**2

    @classmethod
    def from_stiffness(cls, stiffness: float, omega: float, gamma: float) -> "Cantilever":
        return cls(mass=stiffness / omega**2, omega=omega, gamma=gamma)


@dataclass(frozen=True)
class SystemConfig:
    cantilever1: Cantilever
    cantilever2: Cantilever
    sphere_radius: float  # m
    equilibrium_gap: float  # m, mean gap with the static attraction balanced
    temperature: float = 300.0  # K; sets the thermal-noise scale when enabled
    extra_damping_2: float = 0.0  # rad/s, added on top of cantilever2.gamma

    def __post_init__(self):
        if self.extra_damping_2 < 0:
            raise ValueError("extra_damping_2 must be >= 0")
        if self.equilibrium_gap <= 0 or self.sphere_radius <= 0:
            raise ValueError("geometry lengths must be > 0")

    @property
    def gamma2_total(self) -> float:
        return self.cantilever2.gamma + self.extra_damping_2


@dataclass(frozen=True)
class ModulationSchedule:
    """Piecewise-linear (f_mod, delta_d) against time.

    Outside [times[0], times[-1]] the end values are held; the modulation
    phase is continuous everywhere (quadratic in t within each segment).
    """

    times: np.ndarray  # s, strictly increasing
    f_mod: np.ndarray  # Hz
    delta_d: np.ndarray  # m

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        f = np.asarray(self.f_mod, dtype=float)
        d = np.asarray(self.delta_d, dtype=float)
        if not (len(t) == len(f) == len(d)) or len(t) < 1:
            raise ValueError("times, f_mod, delta_d must have equal nonzero length")
        if len(t) > 1 and not np.all(np.diff(t) > 0):
            raise ValueError("knot times must be strictly increasing")
        if np.any(d < 0) or np.any(f <= 0):
            raise ValueError("delta_d must be >= 0 and f_mod > 0")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "f_mod", f)
        object.__setattr__(self, "delta_d", d)

    @classmethod
    def constant(cls, f_mod: float, delta_d: float, t_end: float) -> "ModulationSchedule":
        return cls(np.array([0.0, t_end]), np.array([f_mod, f_mod]), np.array([delta_d, delta_d]))

    def phase_at_knots(self) -> np.ndarray:
        """Accumulated modulation phase at each knot (phase 0 at t = 0)."""
        t, f = self.times, self.f_mod
        ph = np.empty_like(t)
        ph[0] = 2.0 * math.pi * f[0] * t[0]
        for j in range(len(t) - 1):
            ph[j + 1] = ph[j] + 2.0 * math.pi * 0.5 * (f[j] + f[j + 1]) * (t[j + 1] - t[j])
        return ph

    def max_delta(self) -> float:
        return float(np.max(self.delta_d))


@dataclass(frozen=True)
class DriveSignal:
    target: int  # 1 or 2
    amplitude: float  # N
    frequency: float  # rad/s
    window: tuple[float, float]  # (t_on, t_off) s

    def __post_init__(self):
        if self.target not in (1, 2):
            raise ValueError("drive target must be 1 or 2")
        if self.amplitude < 0 or self.frequency <= 0:
            raise ValueError("drive amplitude >= 0 and frequency > 0 required")
        if not self.window[1] > self.window[0] >= 0:
            raise ValueError("drive window must satisfy 0 <= t_on < t_off")


def drive_for_amplitude(
    cantilever: Cantilever,
    target: int,
    steady_amplitude: float,
    frequency: float,
    window: tuple[float, float],
    extra_gamma: float = 0.0,
) -> DriveSignal:
    """Drive whose resonant steady-state amplitude is `steady_amplitude`.

    A resonantly driven mode settles at A = F / (m omega gamma).
    """
    force = steady_amplitude * cantilever.mass * frequency * (cantilever.gamma + extra_gamma)
    return DriveSignal(target=target, amplitude=force, frequency=frequency, window=window)


@dataclass(frozen=True)
class Trajectory:
    t: np.ndarray  # s
    x1: np.ndarray  # m, displacement from the static (force-balanced) equilibrium
    v1: np.ndarray  # m/s
    x2: np.ndarray
    v2: np.ndarray
    gap: np.ndarray  # m, instantaneous separation including modulation
    dt: float  # integrator step
    record_every: int
    omega1_ref: float  # rad/s demodulation references (shifted resonances)
    omega2_ref: float

    @property
    def sample_rate(self) -> float:
        return 1.0 / (self.dt * self.record_every)


def shifted_frequency(cantilever: Cantilever, field: CasimirField, d0: float) -> float:
    """Resonance softened by the attractive force gradient: w' = w sqrt(1 - F'/k)."""
    ratio = field.gradient_at(d0) / cantilever.stiffness
    if ratio >= 1.0:
        raise SnapInError(
            f"force gradient {ratio:.3f} of stiffness at d0: cantilever snaps to the surface"
        )
    return cantilever.omega * math.sqrt(1.0 - ratio)


def equilibrium_offsets(config: SystemConfig, field: CasimirField) -> tuple[float, float, float]:
    """Static displacements (x1s, x2s) and the spring-rest gap d_nat.

    The configured equilibrium_gap is the force-balanced mean gap; the springs'
    rest gap sits farther out by |F|(1/k1 + 1/k2).
    """
    f0 = float(field.force_at(config.equilibrium_gap))
    k1 = config.cantilever1.stiffness
    k2 = config.cantilever2.stiffness
    x1s = f0 / k1
    x2s = -f0 / k2
    d_nat = config.equilibrium_gap - f0 * (1.0 / k1 + 1.0 / k2)
    return x1s, x2s, d_nat


def simulate(
    config: SystemConfig,
    field: CasimirField | None,
    schedule: ModulationSchedule,
    drives: list[DriveSignal] | tuple[DriveSignal, ...] = (),
    noise_seed: int | None = None,
    duration: float = 0.1,
    dt: float = 1e-6,
    record_every: int = 8,
    initial_state: tuple[float, float, float, float] | None = None,
) -> Trajectory:
    """Integrate the full nonlinear equations of motion.

    field=None switches the gap force off entirely (useful for decay and
    drive oracles).  noise_seed=None disables thermal force noise; an integer
    seed adds white Gaussian forces with one-sided spectral density
    4 k_B T gamma m per cantilever and makes the run reproducible.
    initial_state (x1, v1, x2, v2) is measured from the static equilibrium;
    None starts at rest in equilibrium.
    """
    c1, c2 = config.cantilever1, config.cantilever2
    f_max = max(c1.omega, c2.omega) / (2.0 * math.pi)
    if dt > 1.0 / (50.0 * f_max):
        raise ValueError(f"dt = {dt:g} s too coarse: need dt <= 1/(50 * {f_max:.0f} Hz)")
    if field is not None:
        headroom = config.equilibrium_gap - field.x_grid[0]
        if headroom < schedule.max_delta() + 10e-9:
            raise FieldRangeError(
                "field grid floor leaves less than max(delta_d) + 10 nm of headroom below d0"
            )
        if config.equilibrium_gap > field.x_grid[-1]:
            raise FieldRangeError("equilibrium gap above the field grid")
        x1s, x2s, d_nat = equilibrium_offsets(config, field)
        u_knots, a3, a2, a1, a0 = field.spline_arrays()
        gap_lo, gap_hi = field.x_grid[0], field.x_grid[-1]
        w1_ref = shifted_frequency(c1, field, config.equilibrium_gap)
        w2_ref = shifted_frequency(c2, field, config.equilibrium_gap)
    else:
        x1s = x2s = 0.0
        d_nat = config.equilibrium_gap
        u_knots = np.array([0.0, 1.0])
        a3 = a2 = a1 = a0 = np.array([0.0])
        gap_lo, gap_hi = 0.0, math.inf
        w1_ref, w2_ref = c1.omega, c2.omega

    g2_tot = config.gamma2_total
    for d in drives:
        m = c1.mass if d.target == 1 else c2.mass
        g = c1.gamma if d.target == 1 else g2_tot
        predicted = d.amplitude / (m * d.frequency * g)
        if predicted >= config.equilibrium_gap / 20.0:
            raise ValueError(
                f"drive on {d.target} predicts steady amplitude {predicted * 1e9:.2f} nm "
                f">= d0/20; reduce it"
            )

    nsteps = int(round(duration / dt))
    nsteps += (-nsteps) % record_every  # keep the record grid aligned
    if noise_seed is not None and config.temperature > 0:
        rng = np.random.default_rng(noise_seed)
        sigma1 = math.sqrt(2.0 * KB * config.temperature * c1.gamma * c1.mass / dt)
        sigma2 = math.sqrt(2.0 * KB * config.temperature * g2_tot * c2.mass / dt)
        noise1 = rng.standard_normal(nsteps) * sigma1
        noise2 = rng.standard_normal(nsteps) * sigma2
    else:
        noise1 = np.empty(0)
        noise2 = np.empty(0)

    if initial_state is None:
        y0 = (x1s, 0.0, x2s, 0.0)
    else:
        y0 = (
            initial_state[0] + x1s,
            initial_state[1],
            initial_state[2] + x2s,
            initial_state[3],
        )

    if drives:
        drv_target = np.array([d.target for d in drives], dtype=np.int64)
        drv_amp = np.array([d.amplitude for d in drives])
        drv_w = np.array([d.frequency for d in drives])
        drv_t0 = np.array([d.window[0] for d in drives])
        drv_t1 = np.array([d.window[1] for d in drives])
    else:
        drv_target = np.empty(0, dtype=np.int64)
        drv_amp = drv_w = drv_t0 = drv_t1 = np.empty(0)

    rec, status, t_fail = _integrator.integrate(
        y0[0],
        y0[1],
        y0[2],
        y0[3],
        c1.mass,
        c1.stiffness,
        c1.gamma,
        c2.mass,
        c2.stiffness,
        g2_tot,
        d_nat,
        schedule.times,
        schedule.f_mod,
        schedule.delta_d,
        schedule.phase_at_knots(),
        drv_target,
        drv_amp,
        drv_w,
        drv_t0,
        drv_t1,
        noise1,
        noise2,
        dt,
        nsteps,
        record_every,
        field is not None,
        u_knots,
        a3,
        a2,
        a1,
        a0,
        gap_lo,
        gap_hi,
    )
    if status == _integrator.GAP_BELOW:
        raise ContactError(t_fail, gap_lo)
    if status == _integrator.GAP_ABOVE:
        raise FieldRangeError(
            f"gap exceeded the force-grid ceiling ({gap_hi * 1e9:.0f} nm) at t = {t_fail * 1e3:.3f} ms"
        )
    return Trajectory(
        t=rec[:, 0],
        x1=rec[:, 1] - x1s,
        v1=rec[:, 2],
        x2=rec[:, 3] - x2s,
        v2=rec[:, 4],
        gap=rec[:, 5],
        dt=dt,
        record_every=record_every,
        omega1_ref=w1_ref,
        omega2_ref=w2_ref,
    )


def _sliding_quadrature_amplitude(t, x, omega, n_win):
    """Amplitude of the omega component over a trailing window of n_win samples."""
    i_comp = x * np.cos(omega * t)
    q_comp = x * np.sin(omega * t)
    kernel = np.ones(n_win) / n_win
    i_mean = np.convolve(i_comp, kernel, mode="valid")
    q_mean = np.convolve(q_comp, kernel, mode="valid")
    return 2.0 * np.hypot(i_mean, q_mean)


def demodulated_energies(traj: Trajectory, config: SystemConfig):
    """Mode energies E_i = 1/2 k_i A_i^2 from quadrature demodulation.

    A_i is extracted at the shifted resonance over a trailing window of 5
    oscillation periods.  Returns (t, E1, E2) with t trimmed to where both
    windows are filled.
    """
    fs = traj.sample_rate
    n1 = max(2, int(round(5.0 * 2.0 * math.pi / traj.omega1_ref * fs)))
    n2 = max(2, int(round(5.0 * 2.0 * math.pi / traj.omega2_ref * fs)))
    if max(n1, n2) > len(traj.t):
        raise ValueError("trajectory shorter than the 5-period demodulation window")
    a1 = _sliding_quadrature_amplitude(traj.t, traj.x1, traj.omega1_ref, n1)
    a2 = _sliding_quadrature_amplitude(traj.t, traj.x2, traj.omega2_ref, n2)
    k1 = config.cantilever1.stiffness
    k2 = config.cantilever2.stiffness
    n = min(len(a1), len(a2))
    t = traj.t[len(traj.t) - n :]
    return t, 0.5 * k1 * a1[len(a1) - n :] ** 2, 0.5 * k2 * a2[len(a2) - n :] ** 2


def estimate_effective_params(
    length: float,
    width: float,
    thickness: float,
    density: float = 2329.0,  # silicon
    youngs_modulus: float = 169e9,
    tip_mass: float = 0.0,
    gamma: float = 2.0 * math.pi * 2.65,
) -> Cantilever:
    """Seed values for a rectangular-beam cantilever with an optional tip mass.

    k = E w t^3 / (4 L^3) for a tip-loaded rectangular beam; the fundamental
    mode carries ~0.243 of the beam mass.  These are order-of-magnitude
    defaults meant to be overridden by calibrated values in configuration.
    """
    stiffness = youngs_modulus * width * thickness**3 / (4.0 * length**3)
    m_eff = 0.2427 * density * length * width * thickness + tip_mass
    return Cantilever(mass=m_eff, omega=math.sqrt(stiffness / m_eff), gamma=gamma)


def thermal_energy_floor(config: SystemConfig) -> float:
    """k_B T: equipartition energy scale of one mode at the bath temperature."""
    return KB * config.temperature
