"""Microlens-array register geometry and per-site trap parameters.

All quantities are SI (metres, joules, kilograms, rad/s). Angles passed to
the steering functions are in degrees, matching how deflector ranges are
usually quoted.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .constants import MASS_RB85
from .errors import DomainError, RangeError


class NAConvention(str, Enum):
    HALF_PITCH_OVER_F = "half_pitch_over_f"
    HALF_DIAMETER_OVER_F = "half_diameter_over_f"


@dataclass(frozen=True)
class LensArraySpec:
    pitch: float
    lens_diameter: float
    numerical_aperture: float
    rows: int = 1
    cols: int = 1
    demagnification: float = 1.0

    def __post_init__(self):
        if not self.lens_diameter > 0:
            raise DomainError("lens_diameter must be positive")
        if self.pitch < self.lens_diameter:
            raise DomainError("pitch must be >= lens_diameter")
        if not 0 < self.numerical_aperture < 1:
            raise DomainError("numerical_aperture must lie in (0, 1)")
        if self.rows < 1 or self.cols < 1:
            raise DomainError("rows and cols must be >= 1")
        if not self.demagnification > 0:
            raise DomainError("demagnification must be positive")

    @property
    def register_pitch(self):
        """Trap spacing in the (possibly demagnified) atom plane."""
        return self.pitch / self.demagnification


@dataclass(frozen=True)
class TrapParams:
    waist_w0: float
    wavelength: float
    depth_U0: float
    atom_mass: float
    rayleigh_zR: float
    omega_r: float
    omega_z: float

    @property
    def nu_r(self):
        return self.omega_r / (2 * np.pi)

    @property
    def nu_z(self):
        return self.omega_z / (2 * np.pi)


@dataclass(frozen=True)
class SteeringConfig:
    telescope_magnification_V: float = 1.0
    deflector_range: float = 20.0  # deg, maximum |theta|
    na_convention: NAConvention = NAConvention.HALF_PITCH_OVER_F

    def __post_init__(self):
        if not self.telescope_magnification_V > 0:
            raise DomainError("telescope magnification must be positive")
        if not self.deflector_range > 0:
            raise DomainError("deflector_range must be positive")
        object.__setattr__(self, "na_convention", NAConvention(self.na_convention))


@dataclass(frozen=True)
class RegisterPosition:
    offset_x: float = 0.0
    offset_y: float = 0.0

    def __post_init__(self):
        if not (np.isfinite(self.offset_x) and np.isfinite(self.offset_y)):
            raise DomainError("register offsets must be finite")


def derive_trap_params(w0, U0, wavelength, atom_mass=MASS_RB85):
    """Rayleigh range and harmonic trap frequencies of a Gaussian focus.

    Parameters
    ----------
    w0 : float
        1/e^2 waist radius [m].
    U0 : float
        Trap depth [J]; see :func:`microtrap.constants.mk_to_joule`.
    wavelength : float
        Trapping light wavelength [m].
    atom_mass : float
        [kg]

    Returns
    -------
    TrapParams
    """
    if not w0 > 0:
        raise DomainError(f"waist must be positive, got {w0!r}")
    if not wavelength > 0:
        raise DomainError(f"wavelength must be positive, got {wavelength!r}")
    if not atom_mass > 0:
        raise DomainError(f"atom mass must be positive, got {atom_mass!r}")
    if U0 < 0:
        raise DomainError(f"trap depth must be non-negative, got {U0!r}")

    z_r = np.pi * w0**2 / wavelength
    omega_r = np.sqrt(4 * U0 / (atom_mass * w0**2))
    omega_z = np.sqrt(2 * U0 / (atom_mass * z_r**2))
    return TrapParams(
        waist_w0=float(w0),
        wavelength=float(wavelength),
        depth_U0=float(U0),
        atom_mass=float(atom_mass),
        rayleigh_zR=float(z_r),
        omega_r=float(omega_r),
        omega_z=float(omega_z),
    )


def lens_focal_length(spec, convention=NAConvention.HALF_PITCH_OVER_F):
    """Focal length implied by the numerical aperture.

    The aperture radius is either half the pitch or half the lens diameter,
    selected by ``convention``.
    """
    convention = NAConvention(convention)
    if spec.numerical_aperture == 0:
        raise DomainError("numerical aperture is zero")
    if convention is NAConvention.HALF_PITCH_OVER_F:
        radius = spec.pitch / 2
    else:
        radius = spec.lens_diameter / 2
    return radius / spec.numerical_aperture


def _shift_raw(theta_deg, spec, steering):
    f = lens_focal_length(spec, steering.na_convention)
    lens_angle = np.radians(steering.telescope_magnification_V * theta_deg)
    return f * np.tan(lens_angle) / spec.demagnification


def max_steering_shift(spec, steering):
    """Largest lateral shift reachable within the deflector range."""
    return float(_shift_raw(steering.deflector_range, spec, steering))


def angle_to_shift(theta, spec, steering):
    """Lateral focal displacement for a change ``theta`` [deg] of incidence.

    The deflector angle is scaled by the telescope magnification before it
    reaches the lens array; the resulting focal shift f*tan(V*theta) is
    divided by the array's demagnification.
    """
    theta = np.asarray(theta, dtype=float)
    limit = steering.deflector_range
    if steering.telescope_magnification_V * limit >= 90.0:
        limit = np.nextafter(90.0 / steering.telescope_magnification_V, 0)
    if np.any(np.abs(theta) > limit):
        reach = float(_shift_raw(limit, spec, steering))
        raise RangeError(
            f"|theta| exceeds {limit:g} deg; maximum reachable shift is {reach:.6g} m",
            max_reachable=reach,
        )
    shift = _shift_raw(theta, spec, steering)
    return float(shift) if shift.ndim == 0 else shift


def piezo_shift(register, dx, dy, max_travel):
    """Translate the whole register by (dx, dy), bounded by the actuator travel."""
    new_x = register.offset_x + dx
    new_y = register.offset_y + dy
    slack = 1e-12 * max_travel
    if abs(new_x) > max_travel + slack or abs(new_y) > max_travel + slack:
        raise RangeError(
            f"offset ({new_x:.6g}, {new_y:.6g}) m exceeds piezo travel {max_travel:.6g} m",
            max_reachable=max_travel,
        )
    return replace(register, offset_x=new_x, offset_y=new_y)


def piezo_min_ramp_time(resonance_freq, safety_factor=10.0):
    """Shortest smooth ramp that stays clear of the actuator's mechanical resonance."""
    if not resonance_freq > 0:
        raise DomainError("resonance frequency must be positive")
    if safety_factor < 1:
        raise DomainError("safety factor must be >= 1")
    return safety_factor / resonance_freq


def site_positions(spec, pos=None):
    """(rows*cols, 2) array of trap coordinates, row-major, in metres."""
    pos = pos or RegisterPosition()
    a = spec.register_pitch
    rr, cc = np.meshgrid(np.arange(spec.rows), np.arange(spec.cols), indexing="ij")
    xy = np.column_stack([cc.ravel() * a + pos.offset_x, rr.ravel() * a + pos.offset_y])
    return xy
