"""Acceptance gate: one test per numbered criterion.

Each test prints a single summary line with the measured quantities so the
suite output doubles as a scorecard.  Criteria that the physical model cannot
reach are implemented at their stated tolerances and left to fail; the
numbers in the printed lines document how far off they land.
"""

import dataclasses
import math
import time
import warnings

import numpy as np
import pytest

from casimir_dyn.cli import main
from casimir_dyn.constants import C, HBAR
from casimir_dyn.lifshitz import (
    Geometry,
    ThermalSetting,
    energy_per_area_T0,
    force_gradient_over_R,
    pfa_force,
    thermal_fraction,
)
from casimir_dyn.materials import GOLD, SILICON, MirrorStack, PerfectConductor
from casimir_dyn.protocol import (
    ControlLoop,
    efficiency_vs_fmax,
    minimum_splitting,
    psd_map,
    run_transfer_experiment,
    transduction_ratio,
    transduction_ratio_ode,
)
from casimir_dyn.spectral import CouplingMap, EffectiveHamiltonian, eigenvalues, transport_branches

PC = PerfectConductor()
GOLD_PAIR = (MirrorStack.bulk(GOLD), MirrorStack.bulk(GOLD))
R = 34.55e-6


def test_criterion_01_ideal_mirror_quadrature():
    worst = 0.0
    slowest = 0.0
    for x in (50e-9, 100e-9, 500e-9):
        t0 = time.perf_counter()
        got = energy_per_area_T0(PC, PC, x)
        dt = time.perf_counter() - t0
        want = -math.pi**2 * HBAR * C / (720.0 * x**3)
        worst = max(worst, abs(got - want) / abs(want))
        slowest = max(slowest, dt)
    print(f"criterion 1: max rel err {worst:.2e} (tol 5e-3), slowest point {slowest * 1e3:.0f} ms")
    assert worst < 5e-3
    assert slowest < 1.0


def test_criterion_02_pfa_matches_sphere_plate_closed_form():
    worst = 0.0
    for x in (50e-9, 100e-9, 500e-9):
        got = pfa_force(Geometry(R, x), (PC, PC))
        want = -math.pi**3 * HBAR * C * R / (360.0 * x**3)
        worst = max(worst, abs(got - want) / abs(want))
    print(f"criterion 2: max rel err {worst:.2e} (tol 5e-3)")
    assert worst < 5e-3


def test_criterion_03_thermal_fraction_at_room_temperature():
    grid = np.geomspace(50e-9, 1000e-9, 20)
    fracs = np.array([thermal_fraction(GOLD_PAIR, x, 300.0) for x in grid])
    f200 = thermal_fraction(GOLD_PAIR, 200e-9, 300.0)
    print(
        f"criterion 3: max fraction {fracs.max():.4f} at {grid[np.argmax(fracs)] * 1e9:.0f} nm "
        f"(tol 0.06); fraction(200 nm) = {f200:.4f} (target 0.02 +- 0.01)"
    )
    assert np.all(fracs <= 0.06), (
        f"thermal fraction exceeds 0.06 for x >= "
        f"{grid[np.argmax(fracs > 0.06)] * 1e9:.0f} nm (max {fracs.max():.3f})"
    )
    assert abs(f200 - 0.02) <= 0.01


def test_criterion_04_gold_film_on_silicon_is_bulk_like():
    film_pair = (
        MirrorStack(film=GOLD, film_thickness=70e-9, substrate=SILICON),
        MirrorStack.bulk(GOLD),
    )
    thermal = ThermalSetting(300.0)
    worst = 0.0
    for x in np.linspace(100e-9, 500e-9, 5):
        f_film = pfa_force(Geometry(R, x), film_pair, thermal)
        f_bulk = pfa_force(Geometry(R, x), GOLD_PAIR, thermal)
        worst = max(worst, abs(f_film - f_bulk) / abs(f_bulk))
    print(f"criterion 4: max rel force deviation {worst:.2e} (tol 1e-3)")
    assert worst < 1e-3


def test_criterion_05_gold_gradient_below_ideal():
    thermal = ThermalSetting(300.0)
    margin = []
    for x in np.linspace(100e-9, 300e-9, 11):
        gold = force_gradient_over_R(x, GOLD_PAIR, thermal)
        ideal = math.pi**3 * HBAR * C / (120.0 * x**4)
        assert gold < ideal, f"gold gradient not below ideal at {x * 1e9:.0f} nm"
        margin.append(gold / ideal)
    print(f"criterion 5: gold/ideal gradient ratio {min(margin):.3f}..{max(margin):.3f} (all < 1)")


def test_criterion_06_ode_transduction_matches_closed_form(system, gold_field):
    t0 = time.perf_counter()
    delta_d = 0.5e-9  # weak coupling: g well below the damping asymmetry
    cf = transduction_ratio(system, gold_field, delta_d)
    # both sides evaluated at their shared resonance, the coupled-mode
    # difference frequency (f_mod=None selects it in each)
    ode = transduction_ratio_ode(system, gold_field, delta_d, duration=0.6)
    elapsed = time.perf_counter() - t0
    print(
        f"criterion 6: ODE ratio {ode:.5f} vs closed form {cf:.5f} "
        f"(ratio {ode / cf:.3f}, tol 5%) in {elapsed:.1f} s"
    )
    assert ode == pytest.approx(cf, rel=0.05)
    assert elapsed < 30.0


def test_criterion_07_spectral_identities():
    rng = np.random.default_rng(1234)
    worst = 0.0
    for _ in range(10000):
        g1, g2, g, d = rng.uniform(0.1, 100.0, 4)
        h = EffectiveHamiltonian(gamma1=g1, gamma2=g2, g=g, delta=d)
        pair = eigenvalues(h)
        m = h.matrix()
        tr = m[0, 0] + m[1, 1]
        det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
        scale = max(abs(tr), abs(det), 1.0)
        worst = max(
            worst,
            abs(pair.lam_plus + pair.lam_minus - tr) / scale,
            abs(pair.lam_plus * pair.lam_minus - det) / scale,
        )
    g1, g2 = 2 * math.pi * 2.65, 2 * math.pi * 13.82
    ep = eigenvalues(EffectiveHamiltonian(g1, g2, abs(g1 - g2) / 2.0, 0.0))
    gap = abs(ep.lam_plus - ep.lam_minus)
    print(f"criterion 7: worst identity residual {worst:.2e} (tol 1e-12); EP gap {gap:.2e} rad/s")
    assert worst < 1e-12
    assert gap < 1e-3 * g1


def test_criterion_08_branch_exchange_topology(system, gold_field):
    cmap = CouplingMap.from_field(gold_field, system)
    g1, g2 = system.cantilever1.gamma, system.gamma2_total

    def rectangle(f_lo, f_hi, d_lo, d_hi, n=150):
        hs = []
        corners = [(f_lo, d_lo), (f_lo, d_hi), (f_hi, d_hi), (f_hi, d_lo), (f_lo, d_lo)]
        for (fa, da), (fb, db) in zip(corners, corners[1:]):
            for s_ in np.linspace(0.0, 1.0, n):
                hs.append(cmap.hamiltonian(g1, g2, fa + (fb - fa) * s_, da + (db - da) * s_))
        return hs

    # the exceptional point sits at (726.83 Hz, 5.5 nm)
    enclosing = transport_branches(rectangle(680.0, 785.0, 1e-9, 10e-9))
    outside = transport_branches(rectangle(740.0, 785.0, 8e-9, 13.3e-9))
    print(f"criterion 8: enclosing loop swaps branches: {enclosing}; non-enclosing: {outside}")
    assert enclosing is True
    assert outside is False


def test_criterion_09_avoided_crossing_level_repulsion(natural_system, gold_field):
    delta_d = 8e-9  # strong coupling at moderate drive depth
    cmap = CouplingMap.from_field(gold_field, natural_system)
    g = cmap.g(delta_d)
    dg = natural_system.cantilever1.gamma - natural_system.cantilever2.gamma
    expected = math.sqrt(g * g - dg * dg / 4.0) / (2 * math.pi)
    m = psd_map(
        natural_system, gold_field, delta_d,
        np.linspace(719.0, 735.0, 9),
        noise_seed=42, duration=2.0, nperseg=2**15, jobs=4,
    )
    got = minimum_splitting(m)
    print(
        f"criterion 9: min splitting {got:.3f} Hz vs sqrt(g^2 - dgamma^2/4) = "
        f"{expected:.3f} Hz (ratio {got / expected:.3f}, tol 10%)"
    )
    assert got == pytest.approx(expected, rel=0.10)


def test_criterion_10_loop_direction_asymmetry(system, gold_field):
    loop = ControlLoop("cw", 680.0, 785.0, 6.7e-9, 13.3e-9, 0.08)
    t0 = time.perf_counter()
    cw = run_transfer_experiment(system, gold_field, loop, excited=1)
    t_cw = time.perf_counter() - t0
    t0 = time.perf_counter()
    acw = run_transfer_experiment(
        system, gold_field, dataclasses.replace(loop, direction="acw"), excited=1
    )
    t_acw = time.perf_counter() - t0
    cw_frac2 = cw.e2[-1] / (cw.e1[-1] + cw.e2[-1])
    acw_frac1 = acw.e1[-1] / (acw.e1[-1] + acw.e2[-1])
    contrast = cw_frac2 - (acw.e2[-1] / (acw.e1[-1] + acw.e2[-1]))
    print(
        f"criterion 10: cw E2-fraction {cw_frac2:.4f} (need >= 0.7); "
        f"acw E1-fraction {acw_frac1:.4f} (need >= 0.7); "
        f"contrast {contrast:.4f} (need >= 0.6); runs {t_cw:.1f}/{t_acw:.1f} s"
    )
    assert t_cw < 60.0 and t_acw < 60.0
    assert cw_frac2 >= 0.7, f"clockwise transfer fraction {cw_frac2:.3f} < 0.7"
    assert acw_frac1 >= 0.7, f"anticlockwise retention fraction {acw_frac1:.3f} < 0.7"
    assert contrast >= 0.6, f"direction contrast {contrast:.3f} < 0.6"


def test_criterion_11_efficiency_step_at_crossing(system, gold_field):
    cmap = CouplingMap.from_field(gold_field, system)
    f21 = cmap.f21_eff
    grid = np.linspace(690.0, 790.0, 11)
    curve = efficiency_vs_fmax(system, gold_field, grid, jobs=4)
    low = grid <= f21 - 20.0
    high = grid >= f21 + 30.0
    low_max = np.nanmax(curve.eta_mean[low])
    high_min = np.nanmin(curve.eta_mean[high])
    print(
        f"criterion 11: low plateau max {low_max:.3f} (need < 0.2); "
        f"high plateau min {high_min:.3f} (need > 0.7)"
    )
    assert np.all(curve.n_valid[low | high] > 0)
    assert low_max < 0.2, f"low plateau reaches {low_max:.3f}"
    assert high_min > 0.7, f"high plateau only reaches {high_min:.3f}"


def test_criterion_12_cli_loop_is_deterministic(tmp_path):
    out1 = tmp_path / "a" / "run.csv"
    out2 = tmp_path / "b" / "run.csv"
    out1.parent.mkdir()
    out2.parent.mkdir()
    assert main(["loop", "--out", str(out1)]) == 0
    assert main(["loop", "--out", str(out2)]) == 0
    same_csv = out1.read_bytes() == out2.read_bytes()
    same_meta = (out1.parent / "run.csv.meta.toml").read_bytes() == (
        out2.parent / "run.csv.meta.toml"
    ).read_bytes()
    print(f"criterion 12: csv identical: {same_csv}; sidecar identical: {same_meta}")
    assert same_csv and same_meta
