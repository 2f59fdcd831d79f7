"""Two-cantilever dynamics: integrator, demodulation, equilibria."""

import dataclasses
import math

import numpy as np
import pytest

from casimir_dyn.constants import KB
from casimir_dyn.lifshitz import FieldRangeError
from casimir_dyn.mechanics import (
    Cantilever,
    ContactError,
    DriveSignal,
    ModulationSchedule,
    SnapInError,
    Trajectory,
    demodulated_energies,
    drive_for_amplitude,
    equilibrium_offsets,
    estimate_effective_params,
    shifted_frequency,
    simulate,
)


# ------------------------------------------------------------- constructions


def test_cantilever_validation():
    with pytest.raises(ValueError):
        Cantilever(mass=-1e-10, omega=3e4, gamma=10.0)
    with pytest.raises(ValueError):
        Cantilever(mass=1e-10, omega=3e4, gamma=0.0)


def test_cantilever_from_stiffness_round_trip():
    c = Cantilever.from_stiffness(stiffness=0.6, omega=3e4, gamma=16.0)
    assert c.stiffness == pytest.approx(0.6, rel=1e-12)
    assert c.mass == pytest.approx(0.6 / 3e4**2, rel=1e-12)


def test_estimate_effective_params_scaling():
    base = estimate_effective_params(100e-6, 10e-6, 1e-6)
    thick = estimate_effective_params(100e-6, 10e-6, 2e-6)
    assert base.mass > 0 and base.omega > 0
    # f ~ t / L^2 for a rectangular beam, mass ~ t
    assert thick.omega == pytest.approx(2.0 * base.omega, rel=1e-6)
    assert thick.mass == pytest.approx(2.0 * base.mass, rel=1e-6)


def test_schedule_validation():
    with pytest.raises(ValueError):
        ModulationSchedule.constant(0.0, 1e-9, 0.1)
    with pytest.raises(ValueError):
        ModulationSchedule.constant(700.0, -1e-9, 0.1)
    with pytest.raises(ValueError):
        ModulationSchedule(
            times=np.array([0.0, 0.2, 0.1]),
            f_mod=np.array([700.0, 700.0, 700.0]),
            delta_d=np.array([0.0, 0.0, 0.0]),
        )


def test_schedule_phase_accumulates():
    sched = ModulationSchedule(
        times=np.array([0.0, 0.1, 0.2]),
        f_mod=np.array([700.0, 750.0, 750.0]),
        delta_d=np.array([1e-9, 2e-9, 2e-9]),
    )
    ph = sched.phase_at_knots()
    assert ph[0] == 0.0
    assert np.all(np.diff(ph) > 0)
    # linear ramp 700 -> 750 Hz over 0.1 s accumulates 2 pi * 72.5 rad
    assert ph[1] == pytest.approx(2 * math.pi * 72.5, rel=1e-12)
    assert sched.max_delta() == 2e-9


def test_drive_signal_validation():
    with pytest.raises(ValueError):
        DriveSignal(target=3, amplitude=1e-12, frequency=3e4, window=(0.0, 0.1))
    with pytest.raises(ValueError):
        DriveSignal(target=1, amplitude=1e-12, frequency=3e4, window=(0.2, 0.1))


# ---------------------------------------------------------------- statics


def test_equilibrium_offsets_balance(system, gold_field):
    x1s, x2s, d_nat = equilibrium_offsets(system, gold_field)
    f0 = gold_field.force_at(system.equilibrium_gap)
    assert x1s == pytest.approx(f0 / system.cantilever1.stiffness, rel=1e-12)
    assert x2s == pytest.approx(-f0 / system.cantilever2.stiffness, rel=1e-12)
    # springs rest farther out than the loaded equilibrium (attractive pull)
    assert d_nat > system.equilibrium_gap
    assert d_nat + x1s - x2s == pytest.approx(system.equilibrium_gap, rel=1e-12)


def test_equilibrium_start_stays_put(system, gold_field):
    sched = ModulationSchedule.constant(700.0, 0.0, 0.02)
    traj = simulate(system, gold_field, sched, duration=0.02)
    assert np.max(np.abs(traj.x1)) < 1e-15
    assert np.max(np.abs(traj.x2)) < 1e-15


def test_shifted_frequency_softening(system, gold_field):
    c1 = system.cantilever1
    w = shifted_frequency(c1, gold_field, system.equilibrium_gap)
    grad = gold_field.gradient_at(system.equilibrium_gap)
    assert w == pytest.approx(math.sqrt((c1.stiffness - grad) / c1.mass), rel=1e-12)
    assert w < c1.omega  # attractive gradient softens the mode


def test_snap_in_detected(gold_field):
    weak = Cantilever(mass=1e-12, omega=2e5, gamma=1.0)  # k = 0.04 N/m
    with pytest.raises(SnapInError):
        shifted_frequency(weak, gold_field, 30e-9)


# -------------------------------------------------------------- integration


def test_energy_conserved_without_damping(system, gold_field):
    tiny = 1e-9  # rad/s; negligible loss over the run
    s0 = dataclasses.replace(
        system,
        cantilever1=dataclasses.replace(system.cantilever1, gamma=tiny),
        cantilever2=dataclasses.replace(system.cantilever2, gamma=tiny),
        extra_damping_2=0.0,
    )
    x1s, x2s, _ = equilibrium_offsets(s0, gold_field)
    sched = ModulationSchedule.constant(700.0, 0.0, 0.02)
    traj = simulate(s0, gold_field, sched, duration=0.02, initial_state=(2e-9, 0.0, 0.0, 0.0))
    k1, k2 = s0.cantilever1.stiffness, s0.cantilever2.stiffness
    m1, m2 = s0.cantilever1.mass, s0.cantilever2.mass
    U = np.array([gold_field.potential_at(g) for g in traj.gap])
    E = (
        0.5 * m1 * traj.v1**2
        + 0.5 * m2 * traj.v2**2
        + 0.5 * k1 * (traj.x1 + x1s) ** 2
        + 0.5 * k2 * (traj.x2 + x2s) ** 2
        + U
    )
    assert (E.max() - E.min()) / abs(E.mean()) < 1e-6


def test_ringdown_decay_rate(system):
    sched = ModulationSchedule.constant(700.0, 0.0, 0.4)
    traj = simulate(system, None, sched, duration=0.4, initial_state=(2e-9, 0.0, 0.0, 0.0))
    t, e1, _ = demodulated_energies(traj, system)
    sel = (t > 0.05) & (t < 0.35)
    slope = np.polyfit(t[sel], np.log(e1[sel]), 1)[0]
    assert -slope == pytest.approx(system.cantilever1.gamma, rel=0.02)


def test_extra_damping_speeds_mode2_decay(system):
    sched = ModulationSchedule.constant(700.0, 0.0, 0.2)
    traj = simulate(system, None, sched, duration=0.2, initial_state=(0.0, 0.0, 2e-9, 0.0))
    t, _, e2 = demodulated_energies(traj, system)
    sel = (t > 0.02) & (t < 0.18)
    slope = np.polyfit(t[sel], np.log(e2[sel]), 1)[0]
    assert -slope == pytest.approx(system.gamma2_total, rel=0.02)


def test_seeded_runs_bit_identical(system, gold_field):
    sched = ModulationSchedule.constant(726.8, 2e-9, 0.02)
    a = simulate(system, gold_field, sched, noise_seed=11, duration=0.02)
    b = simulate(system, gold_field, sched, noise_seed=11, duration=0.02)
    assert np.array_equal(a.x1, b.x1) and np.array_equal(a.v1, b.v1)
    assert np.array_equal(a.x2, b.x2) and np.array_equal(a.gap, b.gap)
    c = simulate(system, gold_field, sched, noise_seed=12, duration=0.02)
    assert not np.array_equal(a.x1, c.x1)


def test_step_halving_converges(system, gold_field):
    sched = ModulationSchedule.constant(726.8, 2e-9, 0.02)
    coarse = simulate(system, gold_field, sched, duration=0.02, dt=2e-6,
                      record_every=1, initial_state=(1e-9, 0.0, 0.0, 0.0))
    fine = simulate(system, gold_field, sched, duration=0.02, dt=1e-6,
                    record_every=2, initial_state=(1e-9, 0.0, 0.0, 0.0))
    assert len(coarse.t) == len(fine.t)
    assert abs(coarse.x1[-1] - fine.x1[-1]) / 1e-9 < 1e-3


def test_thermal_equipartition_mode2(system, gold_field):
    # gamma2_total ~ 87 rad/s gives ~90 correlation times in 2 s
    sched = ModulationSchedule.constant(700.0, 0.0, 2.0)
    traj = simulate(system, gold_field, sched, noise_seed=3, duration=2.0)
    sel = traj.t > 0.2
    pe = 0.5 * system.cantilever2.stiffness * np.var(traj.x2[sel])
    ke = 0.5 * system.cantilever2.mass * np.var(traj.v2[sel])
    assert 0.6 < pe / (0.5 * KB * system.temperature) < 1.4
    assert ke == pytest.approx(pe, rel=0.3)


def test_contact_raises(system, gold_field):
    sched = ModulationSchedule.constant(700.0, 0.0, 0.01)
    with pytest.raises(ContactError):
        simulate(system, gold_field, sched, duration=0.01,
                 initial_state=(-45e-9, -0.05, 0.0, 0.0))


def test_grid_ceiling_raises(system, gold_field):
    sched = ModulationSchedule.constant(700.0, 0.0, 0.01)
    with pytest.raises(FieldRangeError):
        simulate(system, gold_field, sched, duration=0.01,
                 initial_state=(45e-9, 0.05, 0.0, 0.0))


def test_oversized_drive_rejected(system, gold_field):
    big = DriveSignal(target=1, amplitude=5e-7, frequency=3e4, window=(0.0, 0.1))
    sched = ModulationSchedule.constant(700.0, 0.0, 0.1)
    with pytest.raises(ValueError, match="steady amplitude"):
        simulate(system, gold_field, sched, [big], duration=0.1)


# ------------------------------------------------------------- demodulation


def test_demodulation_recovers_pure_tone(system):
    c1, c2 = system.cantilever1, system.cantilever2
    fs = 125000.0
    t = np.arange(0, 0.05, 1.0 / fs)
    a1, a2 = 1.7e-9, 0.6e-9
    traj = Trajectory(
        t=t,
        x1=a1 * np.cos(c1.omega * t + 0.3),
        v1=np.zeros_like(t),
        x2=a2 * np.cos(c2.omega * t - 1.1),
        v2=np.zeros_like(t),
        gap=np.full_like(t, 76e-9),
        dt=1e-6,
        record_every=8,
        omega1_ref=c1.omega,
        omega2_ref=c2.omega,
    )
    _, e1, e2 = demodulated_energies(traj, system)
    assert e1[-1] == pytest.approx(0.5 * c1.stiffness * a1**2, rel=5e-3)
    assert e2[-1] == pytest.approx(0.5 * c2.stiffness * a2**2, rel=5e-3)


def test_demodulation_needs_five_periods(system):
    t = np.arange(0, 4e-4, 8e-6)  # shorter than 5 periods of mode 1
    traj = Trajectory(
        t=t, x1=np.zeros_like(t), v1=np.zeros_like(t),
        x2=np.zeros_like(t), v2=np.zeros_like(t), gap=np.full_like(t, 76e-9),
        dt=1e-6, record_every=8,
        omega1_ref=system.cantilever1.omega, omega2_ref=system.cantilever2.omega,
    )
    with pytest.raises(ValueError, match="demodulation window"):
        demodulated_energies(traj, system)


def test_resonant_drive_reaches_target_amplitude(system):
    target = 2e-9
    drive = drive_for_amplitude(system.cantilever1, 1, target, system.cantilever1.omega, (0.0, 0.6))
    sched = ModulationSchedule.constant(700.0, 0.0, 0.6)
    traj = simulate(system, None, sched, [drive], duration=0.6)
    _, e1, _ = demodulated_energies(traj, system)
    amp = math.sqrt(2.0 * e1[-1] / system.cantilever1.stiffness)
    assert amp == pytest.approx(target, rel=0.02)
