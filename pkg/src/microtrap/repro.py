"""Headline-number checks for the two array generations and the supply unit."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from . import constants, transport
from .register_control import (TransferSpec, cross_ramp_transfer, default_split_model,
                               make_register, splitting_ratio)
from .scenario import PRESET_ARRAYS, PipelineSection
from .supply_pipeline import HistogramFit, classify_and_score, run_pipeline

COHERENCE_TIME = 70e-3
REPRO_SEED = 2012


@dataclass(frozen=True)
class ReproReport:
    check: str
    paper_value: float
    computed: float
    rel_error: float
    tolerance: float
    passed: bool
    mode: str = "relative"  # or "upper_bound" / "lower_bound"


def _row(check, paper, computed, tol, mode="relative"):
    rel = abs(computed - paper) / abs(paper)
    if mode == "relative":
        ok = rel <= tol
    elif mode == "upper_bound":
        ok = computed <= paper
    else:
        ok = computed >= paper
    return ReproReport(check, float(paper), float(computed), float(rel), float(tol), bool(ok), mode)


def replica_fit():
    """Two-Gaussian description of the detection histogram used for the threshold checks."""
    p = PipelineSection()
    return HistogramFit(0.442, p.bg_rate_mean_cps, p.bg_rate_sigma_cps,
                        0.558, p.atom_rate_mean_cps, p.atom_rate_sigma_cps)


def paper_checks():
    a30, a55 = PRESET_ARRAYS["30um"], PRESET_ARRAYS["55um"]
    t30, t55 = a30.trap(), a55.trap()
    rows = [
        _row("30um omega_r/2pi [Hz]", 39.8e3, t30.nu_r, 0.02),
        _row("30um omega_z/2pi [Hz]", 2.9e3, t30.nu_z, 0.02),
        _row("30um z_R [m]", 25e-6, t30.rayleigh_zR, 0.02),
        _row("55um omega_r/2pi [Hz]", 8.3e3, t55.nu_r, 0.02),
        _row("55um omega_z/2pi [Hz]", 0.4e3, t55.nu_z, 0.02),
        _row("55um z_R [m]", 57e-6, t55.rayleigh_zR, 0.02),
    ]

    # transport over one register pitch at the quoted radial frequencies
    w30, w55 = 2 * np.pi * 39.8e3, 2 * np.pi * 8.3e3
    s30, s55 = 30e-6, 55e-6
    tmin30 = transport.min_transport_time(s30, w30, a30.atom_mass_kg, 1.0)
    tmin55 = transport.min_transport_time(s55, w55, a55.atom_mass_kg, 1.0)
    rows += [
        _row("T_min 55um [s]", 1.3e-3, tmin55, 0.05),
        _row("T_min 30um [s]", 294e-6, tmin30, 0.05),
        _row("T_min ratio 30um/55um (four times faster)", 0.25, tmin30 / tmin55, 0.15),
    ]
    T_large = 10e-3
    env30 = transport.envelope_curve(T_large, s30, w30, a30.atom_mass_kg)
    env55 = transport.envelope_curve(T_large, s55, w55, a55.atom_mass_kg)
    rows.append(_row("envelope ratio 30um/55um at 10 ms", 1e-2, float(env30 / env55), 0.0,
                     "upper_bound"))
    zeros = transport.zero_heating_times(w30, 3)
    rows.append(_row("zero-heating spacing / period", 1.0,
                     float(np.diff(zeros).mean() * w30 / (2 * np.pi)), 1e-9))
    rows.append(_row("shift operations in coherence time", 200,
                     transport.shift_budget(COHERENCE_TIME, 294e-6), 0.25))

    # transfer and splitting
    reg = make_register(1, 1, constants.mk_to_joule(0.1))
    src = replace(reg, mean_atoms=np.array([[10.0]]))
    _, tgt = cross_ramp_transfer(src, reg, TransferSpec(10e-3, 0.85))
    rows.append(_row("transfer efficiency", 0.85, tgt.total_atoms / 10.0, 1e-12))
    hold = constants.mk_to_joule(0.1)
    model = default_split_model(hold)
    rows.append(_row("equal depths -> equal splitting", 1.0,
                     splitting_ratio(model, hold, hold), 1e-12))

    # detection and delivery
    fit = replica_fit()
    stats = classify_and_score(fit, 4833.0)
    rows += [
        _row("delivery probability above 4833 cps", 0.500, stats.delivery_probability, 0.01),
        _row("false-positive mass above 4833 cps", 1e-5, stats.false_positive_mass, 0.05),
        _row("delivery fidelity", 0.99999, stats.delivery_fidelity, 1e-4),
    ]
    cfg = PipelineSection().config(REPRO_SEED)
    _, mc_fit, _ = run_pipeline(cfg)
    rows.append(_row("Monte Carlo 1-atom probability (900 runs)", 0.558, mc_fit.weight_1, 0.1))
    fast = PipelineSection(collision_duration_s=5e-3, exposure_time_s=2e-3,
                           overhead_time_s=1e-3).config(REPRO_SEED)
    rows.append(_row("fast-cycle repetition rate [1/s]", 100.0, 1.0 / fast.cycle_time, 0.0,
                     "lower_bound"))
    return rows


def format_table(rows):
    lines = ["# physical constants"] + [f"#   {s}" for s in constants.header_lines()]
    lines.append(f"{'check':<46} {'paper':>12} {'computed':>12} {'rel.err':>9} {'tol':>8}  result")
    for r in rows:
        tol = {"relative": f"{r.tolerance:.2g}", "upper_bound": "<=paper",
               "lower_bound": ">=paper"}[r.mode]
        lines.append(f"{r.check:<46} {r.paper_value:>12.5g} {r.computed:>12.5g} "
                     f"{r.rel_error:>9.2%} {tol:>8}  {'PASS' if r.passed else 'FAIL'}")
    n_pass = sum(r.passed for r in rows)
    lines.append(f"{n_pass}/{len(rows)} checks passed")
    return "\n".join(lines) + "\n"


def repro_paper(output_dir):
    rows = paper_checks()
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "repro.txt").write_text(format_table(rows))
    (out / "repro.json").write_text(json.dumps([asdict(r) for r in rows], indent=2) + "\n")
    return rows
