"""Dielectric models and Fresnel reflection coefficients."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from casimir_dyn.materials import (
    GOLD,
    SILICON,
    Dielectric,
    Drude,
    MirrorStack,
    PerfectConductor,
    TransverseMode,
    bulk_reflection,
    layered_reflection,
    permittivity_imag_freq,
)

TM = TransverseMode.TM
TE = TransverseMode.TE


def test_gold_table_values():
    assert GOLD.plasma_frequency == pytest.approx(1.37e16)
    assert GOLD.relaxation_rate == pytest.approx(5.32e13)


def test_drude_permittivity_closed_form():
    # eps(i xi) = 1 + wp^2 / (xi (xi + gamma))
    xi = 2.5e15
    expected = 1.0 + GOLD.plasma_frequency**2 / (xi * (xi + GOLD.relaxation_rate))
    assert permittivity_imag_freq(GOLD, xi) == pytest.approx(expected, rel=1e-14)


def test_dielectric_permittivity_is_constant():
    eps = permittivity_imag_freq(SILICON, np.array([1e13, 1e15, 1e17]))
    np.testing.assert_allclose(eps, 11.7)


@given(st.floats(min_value=1e12, max_value=1e18), st.floats(min_value=1.01, max_value=5.0))
def test_drude_permittivity_decreases_with_frequency(xi, factor):
    assert permittivity_imag_freq(GOLD, xi * factor) < permittivity_imag_freq(GOLD, xi)


@given(st.floats(min_value=1e12, max_value=1e18))
def test_drude_permittivity_exceeds_vacuum(xi):
    assert permittivity_imag_freq(GOLD, xi) > 1.0


@settings(max_examples=200)
@given(
    st.sampled_from([GOLD, SILICON, Dielectric(epsilon_static=2.1)]),
    st.floats(min_value=1e10, max_value=1e18),
    st.floats(min_value=1e3, max_value=1e9),
    st.sampled_from([TM, TE]),
)
def test_reflection_magnitude_bounded(model, xi, kperp, mode):
    r = bulk_reflection(model, xi, kperp, mode)
    assert abs(r) <= 1.0 + 1e-12


def test_perfect_conductor_reflections():
    assert bulk_reflection(PerfectConductor(), 1e15, 1e7, TM) == 1.0
    assert bulk_reflection(PerfectConductor(), 1e15, 1e7, TE) == -1.0


def test_zero_frequency_limits():
    kp = 1e7
    # Drude: TM -> 1, TE -> 0
    assert bulk_reflection(GOLD, 1e3, kp, TM) == pytest.approx(1.0, abs=1e-6)
    assert abs(bulk_reflection(GOLD, 1e3, kp, TE)) < 1e-6
    # dielectric: TM -> (eps - 1) / (eps + 1)
    expected = (11.7 - 1.0) / (11.7 + 1.0)
    assert bulk_reflection(SILICON, 1e3, kp, TM) == pytest.approx(expected, rel=1e-6)


def test_tm_reflection_stronger_than_te_for_metal():
    # at imaginary frequencies both are real; the TM response dominates
    xi, kp = 5e15, 2e7
    assert abs(bulk_reflection(GOLD, xi, kp, TM)) > abs(bulk_reflection(GOLD, xi, kp, TE))


class TestMirrorStack:
    def test_finite_film_requires_substrate(self):
        with pytest.raises(ValueError):
            MirrorStack(film=GOLD, film_thickness=70e-9, substrate=None)

    def test_nonpositive_thickness_rejected(self):
        with pytest.raises(ValueError):
            MirrorStack(film=GOLD, film_thickness=0.0, substrate=SILICON)

    def test_bulk_constructor(self):
        stack = MirrorStack.bulk(GOLD)
        assert math.isinf(stack.film_thickness)

    def test_thick_film_converges_to_bulk(self):
        xi, kp = 1e15, 1.0 / 76e-9
        bulk = bulk_reflection(GOLD, xi, kp, TM)
        for t, tol in [(70e-9, 1e-2), (200e-9, 1e-6), (500e-9, 1e-12)]:
            stack = MirrorStack(film=GOLD, film_thickness=t, substrate=SILICON)
            assert abs(layered_reflection(stack, xi, kp, TM) - bulk) < tol

    def test_thin_film_approaches_substrate(self):
        # a 0.01 nm metal film barely perturbs the bare-substrate reflection
        xi, kp = 1e15, 1e7
        thin = MirrorStack(film=GOLD, film_thickness=1e-11, substrate=SILICON)
        bare = bulk_reflection(SILICON, xi, kp, TM)
        assert layered_reflection(thin, xi, kp, TM) == pytest.approx(bare, abs=2e-2)

    def test_film_deviation_monotone_in_thickness(self):
        xi, kp = 1e15, 1.0 / 76e-9
        bulk = bulk_reflection(GOLD, xi, kp, TM)
        devs = []
        for t in (30e-9, 50e-9, 70e-9, 100e-9, 150e-9):
            stack = MirrorStack(film=GOLD, film_thickness=t, substrate=SILICON)
            devs.append(abs(layered_reflection(stack, xi, kp, TM) - bulk))
        assert all(a > b for a, b in zip(devs, devs[1:]))

    def test_layered_zero_frequency_limit_finite(self):
        stack = MirrorStack(film=GOLD, film_thickness=70e-9, substrate=SILICON)
        r_tm, r_te = stack.reflection(0.0, np.array([1e6, 1e7, 1e8]))
        assert np.all(np.isfinite(r_tm)) and np.all(np.isfinite(r_te))
        assert np.all(np.abs(r_tm) <= 1.0) and np.all(np.abs(r_te) <= 1.0)


def test_drude_validation():
    with pytest.raises(ValueError):
        Drude(plasma_frequency=-1.0, relaxation_rate=1e13)
    with pytest.raises(ValueError):
        Dielectric(epsilon_static=0.5)
