import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from microtrap.constants import KB, MASS_RB85, mk_to_joule
from microtrap.errors import DomainError, RangeError
from microtrap.optics import (LensArraySpec, NAConvention, RegisterPosition, SteeringConfig,
                              angle_to_shift, derive_trap_params, lens_focal_length,
                              max_steering_shift, piezo_min_ramp_time, piezo_shift,
                              site_positions)

UM = 1e-6
ARRAY_30 = LensArraySpec(30 * UM, 30 * UM, 0.144, rows=4, cols=4)


def test_trap_params_30um_array():
    t = derive_trap_params(2.5 * UM, mk_to_joule(1.0), 782.7e-9, MASS_RB85)
    # hand-evaluated from the closed forms with m = 1.4099e-25 kg
    assert t.rayleigh_zR == pytest.approx(25.08618e-6, rel=1e-6)
    assert t.nu_r == pytest.approx(39843.511, rel=1e-7)
    assert t.nu_z == pytest.approx(2807.6829, rel=1e-7)


def test_trap_params_55um_array():
    t = derive_trap_params(3.8 * UM, mk_to_joule(0.1), 795.8e-9, MASS_RB85)
    assert t.rayleigh_zR == pytest.approx(57.00502e-6, rel=1e-6)
    assert t.nu_r == pytest.approx(8289.2267, rel=1e-7)
    assert t.nu_z == pytest.approx(390.72346, rel=1e-7)


def test_zero_depth_gives_zero_frequencies():
    t = derive_trap_params(2.5 * UM, 0.0, 782.7e-9, MASS_RB85)
    assert t.omega_r == 0 and t.omega_z == 0


@pytest.mark.parametrize("kwargs", [
    dict(w0=0, U0=1e-26, wavelength=1e-6, atom_mass=1e-25),
    dict(w0=1e-6, U0=1e-26, wavelength=-1e-6, atom_mass=1e-25),
    dict(w0=1e-6, U0=1e-26, wavelength=1e-6, atom_mass=0),
    dict(w0=1e-6, U0=-1e-26, wavelength=1e-6, atom_mass=1e-25),
])
def test_trap_params_domain_errors(kwargs):
    with pytest.raises(DomainError):
        derive_trap_params(**kwargs)


positive = st.floats(min_value=1e-3, max_value=1e3)


@given(w0=positive, depth=positive, lam=positive)
def test_trap_params_self_consistent(w0, depth, lam):
    t = derive_trap_params(w0 * UM, depth * KB * 1e-3, lam * 1e-7, MASS_RB85)
    assert t.rayleigh_zR == pytest.approx(math.pi * t.waist_w0**2 / t.wavelength, rel=1e-9)
    assert t.omega_r == pytest.approx(math.sqrt(4 * t.depth_U0 / (t.atom_mass * t.waist_w0**2)),
                                      rel=1e-9)
    assert t.omega_z == pytest.approx(math.sqrt(2 * t.depth_U0 / (t.atom_mass * t.rayleigh_zR**2)),
                                      rel=1e-9)
    if t.rayleigh_zR > t.waist_w0 / math.sqrt(2):
        assert t.omega_r > t.omega_z


@given(w0=positive, depth=positive)
def test_radial_frequency_scaling(w0, depth):
    a = derive_trap_params(w0 * UM, depth * 1e-27, 1e-6, MASS_RB85)
    b = derive_trap_params(w0 * UM, 2 * depth * 1e-27, 1e-6, MASS_RB85)
    c = derive_trap_params(2 * w0 * UM, depth * 1e-27, 1e-6, MASS_RB85)
    assert b.omega_r / a.omega_r == pytest.approx(math.sqrt(2), rel=1e-12)
    assert a.omega_r / c.omega_r == pytest.approx(2, rel=1e-12)


def test_focal_length_conventions():
    assert lens_focal_length(ARRAY_30) == pytest.approx(104.1667 * UM, rel=1e-5)
    spec = LensArraySpec(125 * UM, 100 * UM, 0.05)
    assert lens_focal_length(spec, "half_diameter_over_f") == pytest.approx(1000 * UM)
    unit = LensArraySpec(1 * UM, 1 * UM, 0.5)
    assert lens_focal_length(unit, NAConvention.HALF_PITCH_OVER_F) == pytest.approx(1 * UM)


@pytest.mark.parametrize("bad", [
    dict(pitch=10, lens_diameter=20, numerical_aperture=0.1),
    dict(pitch=10, lens_diameter=0, numerical_aperture=0.1),
    dict(pitch=10, lens_diameter=10, numerical_aperture=0),
    dict(pitch=10, lens_diameter=10, numerical_aperture=1.0),
    dict(pitch=10, lens_diameter=10, numerical_aperture=0.1, rows=0),
    dict(pitch=10, lens_diameter=10, numerical_aperture=0.1, demagnification=0),
])
def test_lens_array_invariants(bad):
    with pytest.raises(DomainError):
        LensArraySpec(**bad)


STEER = SteeringConfig(telescope_magnification_V=1.0, deflector_range=20.0)


def test_angle_to_shift_values():
    assert angle_to_shift(0.0, ARRAY_30, STEER) == 0.0
    # f * tan(theta) with f = 15 um / 0.144
    assert angle_to_shift(16.4, ARRAY_30, STEER) == pytest.approx(30.6579 * UM, rel=1e-5)
    assert angle_to_shift(8.2, ARRAY_30, STEER) == pytest.approx(15.0106 * UM, rel=1e-5)
    assert angle_to_shift(16.4, ARRAY_30, STEER) == pytest.approx(30 * UM, rel=0.15)
    assert angle_to_shift(8.2, ARRAY_30, STEER) == pytest.approx(15 * UM, rel=0.15)


def test_angle_to_shift_telescope_and_demagnification():
    spec = LensArraySpec(125 * UM, 125 * UM, 0.05, demagnification=125 / 55)
    steer = SteeringConfig(telescope_magnification_V=0.4, deflector_range=20.0)
    f = 62.5 * UM / 0.05
    expected = f * math.tan(math.radians(0.4 * 5.0)) / (125 / 55)
    assert angle_to_shift(5.0, spec, steer) == pytest.approx(expected, rel=1e-12)


def test_angle_out_of_range_reports_reach():
    with pytest.raises(RangeError) as err:
        angle_to_shift(25.0, ARRAY_30, STEER)
    assert err.value.max_reachable == pytest.approx(max_steering_shift(ARRAY_30, STEER))


@given(st.floats(min_value=-19.9, max_value=19.9), st.floats(min_value=1e-3, max_value=1.0))
def test_angle_to_shift_odd_and_increasing(theta, step):
    a = angle_to_shift(theta, ARRAY_30, STEER)
    assert angle_to_shift(-theta, ARRAY_30, STEER) == pytest.approx(-a, abs=1e-18)
    hi = min(theta + step, 20.0)
    if hi > theta:
        assert angle_to_shift(hi, ARRAY_30, STEER) > a


def test_piezo_shift():
    origin = RegisterPosition()
    assert piezo_shift(origin, 0, 30.6 * UM, 30.6 * UM) == RegisterPosition(0, 30.6 * UM)
    assert piezo_shift(origin, 0, 0, 30.6 * UM) == origin
    with pytest.raises(RangeError):
        piezo_shift(origin, 0, 31 * UM, 30.6 * UM)


def test_piezo_ramp_time():
    assert piezo_min_ramp_time(40e3, 10) == pytest.approx(250e-6)
    assert piezo_min_ramp_time(40e3, 40) == pytest.approx(1e-3)
    assert piezo_min_ramp_time(12.5e3, 1) == pytest.approx(1 / 12.5e3)
    with pytest.raises(DomainError):
        piezo_min_ramp_time(40e3, 0.5)


def test_site_positions():
    spec = LensArraySpec(30 * UM, 30 * UM, 0.144, rows=2, cols=2)
    got = {tuple(np.round(p / UM, 9)) for p in site_positions(spec)}
    assert got == {(0, 0), (30, 0), (0, 30), (30, 30)}
    one = LensArraySpec(30 * UM, 30 * UM, 0.144)
    assert np.allclose(site_positions(one, RegisterPosition(5 * UM, 7 * UM)), [[5 * UM, 7 * UM]])
    demag = LensArraySpec(125 * UM, 125 * UM, 0.05, rows=2, cols=1, demagnification=125 / 55)
    p = site_positions(demag)
    assert np.linalg.norm(p[1] - p[0]) == pytest.approx(55 * UM)


@settings(max_examples=50)
@given(st.floats(-30, 30), st.floats(-30, 30))
def test_rigid_shift_preserves_distances(dx, dy):
    pos = piezo_shift(RegisterPosition(), dx * UM, dy * UM, 30.6 * UM)
    a, b = site_positions(ARRAY_30), site_positions(ARRAY_30, pos)
    da = np.linalg.norm(a[:, None] - a[None], axis=-1)
    db = np.linalg.norm(b[:, None] - b[None], axis=-1)
    assert np.allclose(da, db, rtol=0, atol=1e-15)
