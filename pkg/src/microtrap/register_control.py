"""Site-selective depth control, loading, transfer and splitting.

Atom numbers here are ensemble means (floats); integer sampling only
happens in :mod:`microtrap.supply_pipeline`.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .constants import KB
from .errors import AlignmentError, DimensionError, DomainError, SiteIndexError

FULL_SCALE = 255


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SlmMask:
    grid: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.grid)
        if g.ndim != 2:
            raise DimensionError("mask grid must be 2-D")
        if not np.issubdtype(g.dtype, np.integer):
            if not np.all(np.equal(np.mod(g, 1), 0)):
                raise DomainError("mask values must be integers")
        if np.any(g < 0) or np.any(g > FULL_SCALE):
            raise DomainError("mask values must lie in [0, 255]")
        object.__setattr__(self, "grid", _frozen(g, dtype=np.int64))

    @property
    def shape(self):
        return self.grid.shape

    @classmethod
    def full(cls, rows, cols, value=FULL_SCALE):
        return cls(np.full((rows, cols), value, dtype=np.int64))

    @classmethod
    def from_csv(cls, path):
        rows = []
        with open(path, newline="") as fh:
            for line_no, row in enumerate(csv.reader(fh), start=1):
                if not row or all(not c.strip() for c in row):
                    continue
                try:
                    rows.append([int(c) for c in row])
                except ValueError as exc:
                    raise DomainError(f"{path}:{line_no}: {exc}") from None
        if len({len(r) for r in rows}) > 1:
            raise DimensionError(f"{path}: ragged mask rows")
        return cls(np.array(rows, dtype=np.int64))

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            csv.writer(fh, lineterminator="\n").writerows(self.grid.tolist())


@dataclass(frozen=True)
class TransferEvent:
    kind: str
    duration: float
    efficiency: float


@dataclass(frozen=True)
class RegisterState:
    """Immutable snapshot of one trap register.

    ``full_depths`` are the unmasked depths; loading is measured relative to
    them. ``positions`` is an (N, 2) array of site coordinates in row-major
    order, used for alignment checks and export.
    """

    depths: np.ndarray
    mean_atoms: np.ndarray
    beam_envelope: np.ndarray
    loading_weight: np.ndarray
    full_depths: np.ndarray
    positions: np.ndarray | None = None
    events: tuple = field(default=())

    def __post_init__(self):
        shape = np.shape(self.depths)
        for name in ("mean_atoms", "beam_envelope", "loading_weight", "full_depths"):
            if np.shape(getattr(self, name)) != shape:
                raise DimensionError(f"{name} shape does not match depths {shape}")
        for name in ("depths", "mean_atoms", "beam_envelope", "loading_weight", "full_depths"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        if np.any(self.depths < 0):
            raise DomainError("depths must be non-negative")
        if np.any(self.mean_atoms < 0):
            raise DomainError("mean atom numbers must be non-negative")
        for name in ("beam_envelope", "loading_weight"):
            w = getattr(self, name)
            if np.any(w < 0) or np.any(w > 1):
                raise DomainError(f"{name} must lie in [0, 1]")
        if np.any(self.mean_atoms[self.depths == 0] != 0):
            raise DomainError("atoms present in a site of zero depth")
        if self.positions is not None:
            p = np.asarray(self.positions, dtype=float)
            if p.shape != (self.depths.size, 2):
                raise DimensionError("positions must be (n_sites, 2)")
            object.__setattr__(self, "positions", _frozen(p))
        object.__setattr__(self, "events", tuple(self.events))

    @property
    def shape(self):
        return self.depths.shape

    @property
    def total_atoms(self):
        return float(self.mean_atoms.sum())


class SplitKind(str, Enum):
    BOLTZMANN = "boltzmann"
    POWER_LAW = "power_law"


@dataclass(frozen=True)
class SplitModel:
    kind: SplitKind = SplitKind.BOLTZMANN
    temperature_T_eff: float = 0.0
    exponent_gamma: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", SplitKind(self.kind))
        if self.kind is SplitKind.BOLTZMANN and not self.temperature_T_eff > 0:
            raise DomainError("boltzmann split model needs temperature_T_eff > 0")
        if self.kind is SplitKind.POWER_LAW and not self.exponent_gamma > 0:
            raise DomainError("power-law split model needs exponent_gamma > 0")


@dataclass(frozen=True)
class TransferSpec:
    duration: float = 10e-3
    efficiency: float = 0.85

    def __post_init__(self):
        if not 0 <= self.efficiency <= 1:
            raise DomainError("efficiency must lie in [0, 1]")
        if self.duration < 0:
            raise DomainError("duration must be non-negative")


def gaussian_envelope(rows, cols, radius_pitches=2.5):
    """Incident-beam intensity weight over the grid, 1 at the array centre.

    ``radius_pitches`` is the 1/e^2 intensity radius in units of the pitch.
    """
    r = (np.arange(rows) - (rows - 1) / 2)[:, None]
    c = (np.arange(cols) - (cols - 1) / 2)[None, :]
    return np.exp(-2 * (r**2 + c**2) / radius_pitches**2)


def make_register(rows, cols, peak_depth, envelope_radius=2.5, loading_weight=None,
                  positions=None):
    """Empty register whose unmasked depths follow the Gaussian beam envelope."""
    env = gaussian_envelope(rows, cols, envelope_radius)
    if loading_weight is None:
        loading_weight = np.ones((rows, cols))
    depths = peak_depth * env
    return RegisterState(
        depths=depths,
        mean_atoms=np.zeros((rows, cols)),
        beam_envelope=env,
        loading_weight=loading_weight,
        full_depths=depths,
        positions=positions,
    )


def apply_mask(base_depths, mask):
    """Scale each site depth by its 8-bit transmission value / 255."""
    base = np.asarray(base_depths, dtype=float)
    if base.shape != mask.shape:
        raise DimensionError(f"mask shape {mask.shape} does not match register {base.shape}")
    return base * (mask.grid / FULL_SCALE)


def masked(state, mask):
    """New state with the mask applied to the unmasked depths; atoms cleared where depth is 0."""
    depths = apply_mask(state.full_depths, mask)
    atoms = np.where(depths > 0, state.mean_atoms, 0.0)
    return replace(state, depths=depths, mean_atoms=atoms)


def loading_response(depths, full_depths):
    """Fraction of the full-depth loading captured at each site, min(d/d_ref, 1)."""
    d = np.asarray(depths, dtype=float)
    ref = np.asarray(full_depths, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        frac = np.where(ref > 0, d / ref, 0.0)
    return np.clip(frac, 0.0, 1.0)


def load_register(state, peak_mean_atoms):
    if peak_mean_atoms < 0:
        raise DomainError("peak_mean_atoms must be non-negative")
    atoms = (peak_mean_atoms * state.beam_envelope * state.loading_weight
             * loading_response(state.depths, state.full_depths))
    atoms = np.where(state.depths > 0, atoms, 0.0)
    return replace(state, mean_atoms=atoms)


def _check_aligned(a, b):
    if a.shape != b.shape:
        raise AlignmentError(f"register shapes differ: {a.shape} vs {b.shape}")
    if a.positions is not None and b.positions is not None:
        tol = 1e-9 * max(1.0, float(np.max(np.abs(a.positions))))
        if not np.allclose(a.positions, b.positions, rtol=0, atol=tol):
            raise AlignmentError("register site maps are not superimposed")


def ramp_depths(source_depth, target_depth, duration, t):
    """Linear cross-ramp: source goes to 0 while the target rises to its final depth."""
    s = np.clip(np.asarray(t, dtype=float) / duration, 0.0, 1.0) if duration > 0 else 1.0
    return (np.multiply.outer(1 - s, np.asarray(source_depth)),
            np.multiply.outer(s, np.asarray(target_depth)))


def cross_ramp_transfer(source, target, spec):
    """Hand atoms from ``source`` to a superimposed ``target`` register.

    A fraction ``1 - efficiency`` of the atoms is lost. The source ends
    with zero depth and no atoms; the target keeps its final depths.
    """
    _check_aligned(source, target)
    moved = spec.efficiency * source.mean_atoms
    if np.any((moved > 0) & (target.depths == 0)):
        raise AlignmentError("target register has zero depth at an occupied source site")
    event = TransferEvent("cross_ramp", spec.duration, spec.efficiency)
    new_source = replace(source, depths=np.zeros_like(source.depths),
                         mean_atoms=np.zeros_like(source.mean_atoms),
                         events=source.events + (event,))
    new_target = replace(target, mean_atoms=target.mean_atoms + moved,
                         events=target.events + (event,))
    return new_source, new_target


def splitting_ratio(model, depth_hold, depth_move):
    """Shifted-to-unshifted atom-number ratio for two separating traps.

    Boltzmann: R = (exp(Um/kT) - 1) / (exp(Uh/kT) - 1), the ratio of the
    thermal weights of the two wells. Power law: R = (Um/Uh)^gamma.
    Returns inf when only the moving trap has depth.
    """
    if depth_hold < 0 or depth_move < 0:
        raise DomainError("depths must be non-negative")
    if depth_hold == 0 and depth_move == 0:
        raise DomainError("both trap depths are zero")
    if depth_move == 0:
        return 0.0
    if depth_hold == 0:
        return float("inf")
    if model.kind is SplitKind.BOLTZMANN:
        kt = KB * model.temperature_T_eff
        return float(np.expm1(depth_move / kt) / np.expm1(depth_hold / kt))
    return float((depth_move / depth_hold) ** model.exponent_gamma)


def moving_fraction(ratio):
    return 1.0 if np.isinf(ratio) else ratio / (1.0 + ratio)


def _site_index(site, shape):
    try:
        r, c = site
    except (TypeError, ValueError):
        raise SiteIndexError(f"site {site!r} is not a (row, col) pair") from None
    if not (0 <= r < shape[0] and 0 <= c < shape[1]):
        raise SiteIndexError(f"site {site!r} outside register of shape {shape}")
    return int(r), int(c)


def split_sites(moving, holding, selected_sites, model):
    """Separate the moving register from a holding register that is on only at selected sites.

    At a selected site the atoms present in both registers are shared as
    R/(1+R) (moving) and 1/(1+R) (holding). Everywhere else the atoms
    follow the moving register.
    """
    _check_aligned(moving, holding)
    sites = [_site_index(s, moving.shape) for s in selected_sites]
    total = moving.mean_atoms + holding.mean_atoms
    move_atoms = total.copy()
    hold_atoms = np.zeros_like(total)
    for r, c in sites:
        if holding.depths[r, c] <= 0:
            raise DomainError(f"selected site {(r, c)} has zero holding depth")
        ratio = splitting_ratio(model, holding.depths[r, c], moving.depths[r, c])
        f = moving_fraction(ratio)
        move_atoms[r, c] = f * total[r, c]
        hold_atoms[r, c] = total[r, c] - move_atoms[r, c]
    if np.any((move_atoms > 0) & (moving.depths == 0)):
        raise DomainError("atoms would follow a moving site of zero depth")
    return (replace(moving, mean_atoms=move_atoms),
            replace(holding, mean_atoms=hold_atoms))


def default_split_model(depth_hold, hold_in_kT=2.0):
    """Boltzmann model whose effective temperature puts the holding depth at ``hold_in_kT`` k_B T."""
    return SplitModel(SplitKind.BOLTZMANN, temperature_T_eff=depth_hold / (KB * hold_in_kT))


def depth_for_ratio(model, depth_hold, ratio):
    """Moving-trap depth that produces a given splitting ratio (inverse of splitting_ratio)."""
    if ratio < 0:
        raise DomainError("ratio must be non-negative")
    if model.kind is SplitKind.BOLTZMANN:
        kt = KB * model.temperature_T_eff
        return float(kt * np.log1p(ratio * np.expm1(depth_hold / kt)))
    return float(depth_hold * ratio ** (1.0 / model.exponent_gamma))


def export_register_csv(state, path):
    rows, cols = state.shape
    pos = state.positions
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["site", "row", "col", "x_m", "y_m", "depth_J", "mean_atoms"])
        for i in range(rows * cols):
            r, c = divmod(i, cols)
            x, y = (pos[i] if pos is not None else (float("nan"), float("nan")))
            w.writerow([i, r, c, f"{x:.9e}", f"{y:.9e}",
                        f"{state.depths[r, c]:.9e}", f"{state.mean_atoms[r, c]:.9e}"])
