"""Physical constants (SI) shared by every module."""

HBAR = 1.054571817e-34  # J s
KB = 1.380649e-23  # J / K
MASS_RB85 = 1.4099e-25  # kg

TWO_PI = 6.283185307179586


def mk_to_joule(depth_mk):
    """Convert a trap depth quoted as k_B x mK into joules."""
    return KB * depth_mk * 1e-3


def joule_to_mk(depth_j):
    return depth_j / KB * 1e3


def header_lines():
    """Constants as text lines, printed at the top of every report."""
    return [
        f"hbar = {HBAR!r} J s",
        f"k_B = {KB!r} J/K",
        f"m(85Rb) = {MASS_RB85!r} kg",
    ]
