"""Scenario files: JSON with the physical unit spelled out in every key."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .constants import MASS_RB85, mk_to_joule
from .errors import ConfigError, DomainError
from .optics import LensArraySpec, derive_trap_params
from .register_control import SplitKind, SplitModel
from .supply_pipeline import PipelineConfig


@dataclass(frozen=True)
class ArrayConfig:
    name: str
    pitch_um: float
    lens_diameter_um: float
    numerical_aperture: float
    waist_um: float
    depth_mK: float
    wavelength_nm: float
    rows: int = 1
    cols: int = 1
    demagnification: float = 1.0
    atom_mass_kg: float = MASS_RB85

    def lens_spec(self):
        return LensArraySpec(self.pitch_um * 1e-6, self.lens_diameter_um * 1e-6,
                             self.numerical_aperture, self.rows, self.cols,
                             self.demagnification)

    def trap(self):
        return derive_trap_params(self.waist_um * 1e-6, mk_to_joule(self.depth_mK),
                                  self.wavelength_nm * 1e-9, self.atom_mass_kg)


@dataclass(frozen=True)
class TransportSweep:
    array: str
    t_min_s: float
    t_max_s: float
    points: int = 200
    distance_um: float | None = None  # default: one register pitch
    log_spacing: bool = False
    oracle: bool = False
    oracle_steps: int = 100_000


@dataclass(frozen=True)
class MaskConfig:
    name: str
    array: str
    grid: list | None = None
    csv: str | None = None
    peak_mean_atoms: float = 10.0
    envelope_radius_pitches: float = 2.5


@dataclass(frozen=True)
class SplitModelConfig:
    kind: str = "boltzmann"
    T_eff_uK: float | None = None
    exponent_gamma: float | None = None

    def model(self):
        if SplitKind(self.kind) is SplitKind.BOLTZMANN:
            return SplitModel(SplitKind.BOLTZMANN, temperature_T_eff=(self.T_eff_uK or 0) * 1e-6)
        return SplitModel(SplitKind.POWER_LAW, exponent_gamma=self.exponent_gamma or 0)


@dataclass(frozen=True)
class SplitExperiment:
    array: str
    selected_sites: list
    depth_hold_mK: float
    depth_move_mK: float
    model: SplitModelConfig = field(default_factory=SplitModelConfig)
    peak_mean_atoms: float = 10.0
    transfer_efficiency: float = 0.85
    transfer_duration_s: float = 10e-3


_PIPE = PipelineConfig()


@dataclass(frozen=True)
class PipelineSection:
    poisson_mean_lambda: float = _PIPE.poisson_mean_lambda
    collision_duration_s: float = _PIPE.collision_duration
    single_atom_retention: float = _PIPE.single_atom_retention
    pair_single_loss: float = _PIPE.pair_single_loss
    exposure_time_s: float = _PIPE.exposure_time
    overhead_time_s: float = _PIPE.overhead_time
    bg_rate_mean_cps: float = _PIPE.bg_rate_mean
    bg_rate_sigma_cps: float = _PIPE.bg_rate_sigma
    atom_rate_mean_cps: float = _PIPE.atom_rate_mean
    atom_rate_sigma_cps: float = _PIPE.atom_rate_sigma
    threshold_cps: float = _PIPE.threshold
    trials: int = _PIPE.trials
    bin_width_cps: float | None = None
    rng_seed: int | None = None

    def config(self, default_seed=0):
        return PipelineConfig(
            poisson_mean_lambda=self.poisson_mean_lambda,
            collision_duration=self.collision_duration_s,
            single_atom_retention=self.single_atom_retention,
            exposure_time=self.exposure_time_s,
            bg_rate_mean=self.bg_rate_mean_cps,
            bg_rate_sigma=self.bg_rate_sigma_cps,
            atom_rate_mean=self.atom_rate_mean_cps,
            atom_rate_sigma=self.atom_rate_sigma_cps,
            threshold=self.threshold_cps,
            trials=self.trials,
            rng_seed=default_seed if self.rng_seed is None else self.rng_seed,
            overhead_time=self.overhead_time_s,
            pair_single_loss=self.pair_single_loss,
            bin_width=self.bin_width_cps,
        )


@dataclass(frozen=True)
class Scenario:
    output_dir: str = "out"
    seed: int = 0
    arrays: tuple = ()
    transports: tuple = ()
    masks: tuple = ()
    splits: tuple = ()
    pipeline: PipelineSection | None = None

    def array(self, name):
        for a in self.arrays:
            if a.name == name:
                return a
        raise KeyError(name)

    def to_dict(self):
        d = asdict(self)
        for key in ("arrays", "transports", "masks", "splits"):
            d[key] = list(d[key])
        return d

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2) + "\n"


# Built-in registers from the two array generations.
PRESET_ARRAYS = {
    "30um": ArrayConfig("30um", pitch_um=30, lens_diameter_um=30, numerical_aperture=0.144,
                        waist_um=2.5, depth_mK=1.0, wavelength_nm=782.7),
    "55um": ArrayConfig("55um", pitch_um=125, lens_diameter_um=125, numerical_aperture=0.05,
                        waist_um=3.8, depth_mK=0.1, wavelength_nm=795.8,
                        demagnification=125 / 55),
}


def _build(cls, data, where):
    if not isinstance(data, dict):
        raise ConfigError(f"expected an object, got {type(data).__name__}", where)
    names = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"unknown field(s) {', '.join(unknown)}", where)
    try:
        return cls(**data)
    except TypeError as exc:
        raise ConfigError(str(exc), where) from None


def _num(value, where, positive=False, integer=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"expected a number, got {value!r}", where)
    if integer and int(value) != value:
        raise ConfigError(f"expected an integer, got {value!r}", where)
    if positive and not value > 0:
        raise ConfigError(f"must be positive, got {value!r}", where)


def scenario_from_dict(data):
    if not isinstance(data, dict):
        raise ConfigError("top level must be an object")
    top = {f.name for f in fields(Scenario)}
    unknown = sorted(set(data) - top)
    if unknown:
        raise ConfigError(f"unknown field(s) {', '.join(unknown)}", "scenario")

    arrays = tuple(_build(ArrayConfig, a, f"arrays[{i}]")
                   for i, a in enumerate(data.get("arrays", [])))
    transports = tuple(_build(TransportSweep, t, f"transports[{i}]")
                       for i, t in enumerate(data.get("transports", [])))
    masks = tuple(_build(MaskConfig, m, f"masks[{i}]")
                  for i, m in enumerate(data.get("masks", [])))
    splits = []
    for i, s in enumerate(data.get("splits", [])):
        s = dict(s) if isinstance(s, dict) else s
        if isinstance(s, dict) and isinstance(s.get("model"), dict):
            s["model"] = _build(SplitModelConfig, s["model"], f"splits[{i}].model")
        splits.append(_build(SplitExperiment, s, f"splits[{i}]"))
    pipeline = data.get("pipeline")
    if pipeline is not None:
        pipeline = _build(PipelineSection, pipeline, "pipeline")
    scenario = Scenario(
        output_dir=data.get("output_dir", "out"),
        seed=data.get("seed", 0),
        arrays=arrays,
        transports=transports,
        masks=masks,
        splits=tuple(splits),
        pipeline=pipeline,
    )
    validate(scenario)
    return scenario


def validate(sc):
    """Raise :class:`ConfigError` unless every section is physically meaningful."""
    if not (sc.transports or sc.masks or sc.splits or sc.pipeline):
        raise ConfigError("scenario requests no computation", "scenario")
    _num(sc.seed, "seed", integer=True)
    if not isinstance(sc.output_dir, str) or not sc.output_dir:
        raise ConfigError("must be a non-empty path", "output_dir")

    names = set()
    for i, a in enumerate(sc.arrays):
        where = f"arrays[{i}]"
        if a.name in names:
            raise ConfigError(f"duplicate array name {a.name!r}", where)
        names.add(a.name)
        for key in ("pitch_um", "lens_diameter_um", "numerical_aperture", "waist_um",
                    "wavelength_nm", "demagnification", "atom_mass_kg"):
            _num(getattr(a, key), f"{where}.{key}", positive=True)
        _num(a.depth_mK, f"{where}.depth_mK")
        _num(a.rows, f"{where}.rows", positive=True, integer=True)
        _num(a.cols, f"{where}.cols", positive=True, integer=True)
        try:
            a.lens_spec()
            a.trap()
        except DomainError as exc:
            raise ConfigError(str(exc), where) from None

    def need_array(name, where):
        if name not in names:
            raise ConfigError(f"references unknown array {name!r}", where)

    for i, t in enumerate(sc.transports):
        where = f"transports[{i}]"
        need_array(t.array, f"{where}.array")
        _num(t.t_min_s, f"{where}.t_min_s", positive=True)
        _num(t.t_max_s, f"{where}.t_max_s", positive=True)
        if t.t_max_s < t.t_min_s:
            raise ConfigError("t_max_s must be >= t_min_s", where)
        _num(t.points, f"{where}.points", positive=True, integer=True)
        _num(t.oracle_steps, f"{where}.oracle_steps", positive=True, integer=True)
        if t.distance_um is not None:
            _num(t.distance_um, f"{where}.distance_um", positive=True)

    for i, m in enumerate(sc.masks):
        where = f"masks[{i}]"
        need_array(m.array, f"{where}.array")
        if (m.grid is None) == (m.csv is None):
            raise ConfigError("exactly one of grid or csv is required", where)
        _num(m.peak_mean_atoms, f"{where}.peak_mean_atoms")

    for i, s in enumerate(sc.splits):
        where = f"splits[{i}]"
        need_array(s.array, f"{where}.array")
        _num(s.depth_hold_mK, f"{where}.depth_hold_mK", positive=True)
        _num(s.depth_move_mK, f"{where}.depth_move_mK", positive=True)
        try:
            s.model.model()
        except (DomainError, ValueError) as exc:
            raise ConfigError(str(exc), f"{where}.model") from None
        a = sc.array(s.array)
        for site in s.selected_sites:
            if (not isinstance(site, (list, tuple)) or len(site) != 2
                    or not (0 <= site[0] < a.rows and 0 <= site[1] < a.cols)):
                raise ConfigError(f"site {site!r} outside {a.rows}x{a.cols} register",
                                  f"{where}.selected_sites")

    if sc.pipeline is not None:
        try:
            sc.pipeline.config(sc.seed)
        except (DomainError, TypeError) as exc:
            raise ConfigError(str(exc), "pipeline") from None


def loads(text):
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(exc.msg, f"line {exc.lineno} column {exc.colno}") from None
    return scenario_from_dict(data)


def load(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(str(exc), str(path)) from None
    return loads(text)
