"""Numerical model of 2D microlens optical-microtrap registers."""

from .constants import HBAR, KB, MASS_RB85, mk_to_joule
from .optics import (LensArraySpec, RegisterPosition, SteeringConfig, TrapParams,
                     angle_to_shift, derive_trap_params, lens_focal_length, piezo_min_ramp_time,
                     piezo_shift, site_positions)
from .transport import (HeatingResult, TransportSpec, heating_added, heating_envelope,
                        min_transport_time, parametric_adiabaticity, shift_budget,
                        simulate_transport_oracle, zero_heating_times)

__version__ = "0.1.0"
