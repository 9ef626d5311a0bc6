"""Motional heating of an atom carried by a moving harmonic trap.

The closed-form excitation for a sinusoidal ramp of distance S in time T is

    n(T) = m S^2 pi^4 w0 cos^2(w0 T / 2) / (hbar (pi^2 - w0^2 T^2)^2)

whose envelope (cos^2 -> 1) bounds the heating in the adiabatic branch
w0 T > pi. A fixed-step RK4 integration of the driven oscillator serves as
an independent check of the closed form.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .constants import HBAR, MASS_RB85
from .errors import BracketError, DomainError, NotAdiabaticError, NumericError

POLE_MARGIN = 1e-6


@dataclass(frozen=True)
class TransportSpec:
    distance_S: float
    duration_T: float
    omega0: float
    atom_mass: float = MASS_RB85
    trajectory: str = "sinusoidal_ramp"

    def __post_init__(self):
        if self.distance_S < 0:
            raise DomainError("distance must be non-negative")
        if not self.duration_T > 0:
            raise DomainError("duration must be positive")
        if not self.omega0 > 0:
            raise DomainError("trap frequency must be positive")
        if self.trajectory != "sinusoidal_ramp":
            raise DomainError(f"unsupported trajectory {self.trajectory!r}")

    @property
    def phase(self):
        """w0 * T"""
        return self.omega0 * self.duration_T


@dataclass(frozen=True)
class HeatingResult:
    n_added: float
    energy_added: float
    is_envelope: bool = False


@dataclass(frozen=True)
class OscillatorState:
    q: float
    p: float


def _prefactor(S, omega0, mass):
    return mass * S**2 * omega0 / HBAR


def _result(n, omega0, envelope):
    return HeatingResult(n_added=float(n), energy_added=float(n * HBAR * omega0),
                         is_envelope=envelope)


def n_added_curve(T, S, omega0, atom_mass=MASS_RB85):
    """Vectorised closed-form heating over an array of durations.

    Written as sinc^2 of the detuning from w0 T = pi so that the removable
    singularity needs no special case.
    """
    x = omega0 * np.asarray(T, dtype=float)
    delta = np.pi - x
    # cos(x/2) / (pi^2 - x^2) = sinc(delta / 2pi) / (2 (pi + x))
    s = np.sinc(delta / (2 * np.pi))
    return _prefactor(S, omega0, atom_mass) * np.pi**4 * s**2 / (4 * (np.pi + x) ** 2)


def envelope_curve(T, S, omega0, atom_mass=MASS_RB85):
    """Closed-form envelope over an array of durations; +inf at the pole."""
    x = omega0 * np.asarray(T, dtype=float)
    with np.errstate(divide="ignore"):
        return _prefactor(S, omega0, atom_mass) * np.pi**4 / (np.pi**2 - x**2) ** 2


def heating_added(spec):
    n = n_added_curve(spec.duration_T, spec.distance_S, spec.omega0, spec.atom_mass)
    return _result(n, spec.omega0, False)


def heating_envelope(spec, strict=True):
    """Upper bound on the heating, valid for every T.

    With ``strict`` (default) only the adiabatic branch w0 T > pi is accepted
    and anything at or below the pole raises :class:`NotAdiabaticError`.
    ``strict=False`` evaluates both branches and returns inf at the pole.
    """
    if strict and spec.phase <= np.pi * (1 + POLE_MARGIN):
        raise NotAdiabaticError(
            f"w0*T = {spec.phase:.6g} is not above pi; envelope is only defined "
            "in the adiabatic branch"
        )
    n = envelope_curve(spec.duration_T, spec.distance_S, spec.omega0, spec.atom_mass)
    return _result(n, spec.omega0, True)


def singular_limit(S, omega0, atom_mass=MASS_RB85):
    """Heating at w0 T = pi, the finite limit of the closed form."""
    return _prefactor(S, omega0, atom_mass) * np.pi**2 / 16


def min_transport_time(S, omega0, atom_mass=MASS_RB85, n_max=1.0, rtol=1e-6):
    """Shortest adiabatic-branch duration whose heating envelope is <= n_max.

    Bisection on the monotonically decreasing envelope over the bracket
    [1.01 pi/w0, 1e6/w0].
    """
    if not n_max > 0:
        raise DomainError("n_max must be positive")
    if not S > 0:
        raise DomainError("distance must be positive")
    if not omega0 > 0:
        raise DomainError("trap frequency must be positive")

    def excess(T):
        return float(envelope_curve(T, S, omega0, atom_mass)) - n_max

    lo = 1.01 * np.pi / omega0
    hi = 1e6 / omega0
    if excess(lo) <= 0:
        # envelope diverges at the pole, so a tighter lower bound always brackets
        lo = np.pi * (1 + POLE_MARGIN) / omega0
        if excess(lo) <= 0:
            raise BracketError("envelope already below n_max at the pole margin", lo, hi)
    if excess(hi) > 0:
        raise BracketError(
            f"envelope still above n_max={n_max:g} at T={hi:.3g} s; no bracket in "
            f"[{lo:.3g}, {hi:.3g}] s",
            lo, hi,
        )
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if excess(mid) > 0:
            lo = mid
        else:
            hi = mid
    return hi


def zero_heating_times(omega0, k_max):
    """Durations T_k = (2k+1) pi / w0, k = 1..k_max, where the heating vanishes."""
    if k_max < 1:
        raise DomainError("k_max must be >= 1")
    k = np.arange(1, k_max + 1)
    return (2 * k + 1) * np.pi / omega0


def _ramp_acceleration(tau, S, T):
    # x(t) = (S/2)(1 - cos(pi t / T))
    return 0.5 * S * (np.pi / T) ** 2 * np.cos(np.pi * tau)


def integrate_transport(T, S, omega0, steps=100_000):
    """RK4 integration of q'' = -w0^2 q - x''(t) for each duration in ``T``.

    All durations are advanced together in the normalised time tau = t/T so
    that every one of them takes exactly ``steps`` steps.

    Returns
    -------
    q, v : ndarray
        Displacement from the trap centre and its velocity at t = T.
    """
    T = np.atleast_1d(np.asarray(T, dtype=float))
    q = np.zeros_like(T)
    v = np.zeros_like(T)
    h = T / steps
    dtau = 1.0 / steps
    w2 = omega0**2

    def acc(tau, q):
        return -w2 * q - _ramp_acceleration(tau, S, T)

    for i in range(steps):
        tau = i * dtau
        k1q, k1v = v, acc(tau, q)
        k2q, k2v = v + 0.5 * h * k1v, acc(tau + 0.5 * dtau, q + 0.5 * h * k1q)
        k3q, k3v = v + 0.5 * h * k2v, acc(tau + 0.5 * dtau, q + 0.5 * h * k2q)
        k4q, k4v = v + h * k3v, acc(tau + dtau, q + h * k3q)
        q = q + h / 6 * (k1q + 2 * k2q + 2 * k3q + k4q)
        v = v + h / 6 * (k1v + 2 * k2v + 2 * k3v + k4v)
    if not (np.all(np.isfinite(q)) and np.all(np.isfinite(v))):
        raise NumericError("oscillator state became non-finite")
    return q, v


def oracle_curve(T, S, omega0, atom_mass=MASS_RB85, steps=100_000):
    """Final motional energy in units of hbar*w0 for each duration in ``T``."""
    q, v = integrate_transport(T, S, omega0, steps)
    energy = 0.5 * atom_mass * (v**2 + omega0**2 * q**2)
    return energy / (HBAR * omega0)


def simulate_transport_oracle(spec, steps=100_000):
    n = oracle_curve(spec.duration_T, spec.distance_S, spec.omega0, spec.atom_mass, steps)[0]
    return _result(n, spec.omega0, False)


def final_state(spec, steps=100_000):
    q, v = integrate_transport(spec.duration_T, spec.distance_S, spec.omega0, steps)
    return OscillatorState(q=float(q[0]), p=float(spec.atom_mass * v[0]))


def parametric_adiabaticity(omega_of_t, dt):
    """max |dw/dt| / w^2 over a sampled trap-frequency history."""
    w = np.asarray(omega_of_t, dtype=float)
    if np.any(w <= 0):
        raise DomainError("trap frequency samples must be positive")
    if w.size < 2:
        return 0.0
    wdot = np.gradient(w, dt)
    return float(np.max(np.abs(wdot) / w**2))


def shift_budget(coherence_time, per_shift_time):
    """Number of complete shift operations that fit in the coherence time."""
    if not (coherence_time > 0 and per_shift_time > 0):
        raise DomainError("times must be positive")
    return math.floor(coherence_time / per_shift_time)
