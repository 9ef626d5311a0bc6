"""Command-line front end.

    microtrap run SCENARIO.json
    microtrap repro --out DIR
    microtrap sweep-transport --array 30um --tmin 1e-5 --tmax 2e-3 --points 400

Exit codes: 0 success, 2 configuration error, 3 numerical error.
"""
from __future__ import annotations

import argparse
import csv
import io
import logging
import sys
from pathlib import Path

import numpy as np

from . import constants, repro, scenario as scenario_mod, transport
from .errors import ConfigError, NumericError
from .optics import site_positions
from .register_control import (SlmMask, TransferSpec, cross_ramp_transfer, export_register_csv,
                               load_register, make_register, masked, split_sites)
from .supply_pipeline import build_histogram, run_pipeline, write_histogram, write_trial_log

log = logging.getLogger("microtrap")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


def transport_rows(array, sweep):
    """Rows (T, analytic, envelope, oracle) for one sweep; oracle is None when disabled."""
    trap = array.trap()
    spec = array.lens_spec()
    S = sweep.distance_um * 1e-6 if sweep.distance_um is not None else spec.register_pitch
    if sweep.log_spacing:
        T = np.geomspace(sweep.t_min_s, sweep.t_max_s, sweep.points)
    else:
        T = np.linspace(sweep.t_min_s, sweep.t_max_s, sweep.points)
    w, m = trap.omega_r, trap.atom_mass
    analytic = transport.n_added_curve(T, S, w, m)
    envelope = transport.envelope_curve(T, S, w, m)
    oracle = (transport.oracle_curve(T, S, w, m, sweep.oracle_steps) if sweep.oracle
              else [None] * len(T))
    return list(zip(T, analytic, envelope, oracle))


def write_transport_csv(rows, fh):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["T_s", "n_added_analytic", "n_added_envelope", "n_added_oracle"])
    for T, a, e, o in rows:
        w.writerow([f"{T:.9e}", f"{a:.9e}", f"{e:.9e}", "" if o is None else f"{o:.9e}"])


def run_scenario(sc, base_dir="."):
    """Execute every section of a parsed scenario and write its outputs.

    Returns the list of written paths.
    """
    out = Path(base_dir) / sc.output_dir
    out.mkdir(parents=True, exist_ok=True)
    written = []
    report = ["# microtrap scenario report"] + [f"# {s}" for s in constants.header_lines()]

    for i, sweep in enumerate(sc.transports):
        array = sc.array(sweep.array)
        path = out / f"transport_{i:02d}_{array.name}.csv"
        with open(path, "w", newline="") as fh:
            write_transport_csv(transport_rows(array, sweep), fh)
        written.append(path)
        trap = array.trap()
        S = (sweep.distance_um * 1e-6 if sweep.distance_um is not None
             else array.lens_spec().register_pitch)
        tmin = transport.min_transport_time(S, trap.omega_r, trap.atom_mass, 1.0)
        report.append(f"transport[{i}] {array.name}: omega_r/2pi = {trap.nu_r:.6g} Hz, "
                      f"S = {S:.6g} m, T_min(n<=1) = {tmin:.6g} s")

    for mask_cfg in sc.masks:
        array = sc.array(mask_cfg.array)
        spec = array.lens_spec()
        mask = (SlmMask(np.array(mask_cfg.grid)) if mask_cfg.grid is not None
                else SlmMask.from_csv(Path(base_dir) / mask_cfg.csv))
        reg = make_register(spec.rows, spec.cols, array.trap().depth_U0,
                            envelope_radius=mask_cfg.envelope_radius_pitches,
                            positions=site_positions(spec))
        reg = load_register(masked(reg, mask), mask_cfg.peak_mean_atoms)
        path = out / f"register_{mask_cfg.name}.csv"
        export_register_csv(reg, path)
        written.append(path)
        report.append(f"mask {mask_cfg.name}: total mean atoms = {reg.total_atoms:.6g}")

    for i, sp in enumerate(sc.splits):
        array = sc.array(sp.array)
        spec = array.lens_spec()
        hold_depth = constants.mk_to_joule(sp.depth_hold_mK)
        move_depth = constants.mk_to_joule(sp.depth_move_mK)
        pos = site_positions(spec)
        uniform = dict(envelope_radius=np.inf, positions=pos)
        source = load_register(make_register(spec.rows, spec.cols, array.trap().depth_U0,
                                             **uniform), sp.peak_mean_atoms)
        moving = make_register(spec.rows, spec.cols, move_depth, **uniform)
        _, moving = cross_ramp_transfer(
            source, moving, TransferSpec(sp.transfer_duration_s, sp.transfer_efficiency))
        grid = np.zeros((spec.rows, spec.cols), dtype=int)
        for r, c in sp.selected_sites:
            grid[r, c] = 255
        holding = masked(make_register(spec.rows, spec.cols, hold_depth, **uniform),
                         SlmMask(grid))
        moved, held = split_sites(moving, holding, [tuple(s) for s in sp.selected_sites],
                                  sp.model.model())
        for tag, state in (("moving", moved), ("holding", held)):
            path = out / f"split_{i:02d}_{tag}.csv"
            export_register_csv(state, path)
            written.append(path)
        report.append(f"split[{i}]: moving {moved.total_atoms:.6g}, holding "
                      f"{held.total_atoms:.6g} mean atoms")

    if sc.pipeline is not None:
        cfg = sc.pipeline.config(sc.seed)
        outcomes, fit, stats = run_pipeline(cfg)
        paths = (out / "pipeline_trials.csv", out / "pipeline_histogram.csv",
                 out / "pipeline_stats.json")
        write_trial_log(outcomes, paths[0])
        write_histogram(build_histogram([o.count_rate for o in outcomes], cfg.bin_width), paths[1])
        paths[2].write_text(stats.to_json())
        written.extend(paths)
        report.append(f"pipeline: p_one = {stats.p_one:.4f}, delivery = "
                      f"{stats.delivery_probability:.4f}, fidelity = {stats.delivery_fidelity:.6f},"
                      f" rate = {stats.repetition_rate:.4g} /s (target > 100 /s)")

    path = out / "report.txt"
    path.write_text("\n".join(report) + "\n")
    written.append(path)
    return written


def _cmd_run(args):
    sc = scenario_mod.load(args.scenario)
    base = Path(args.scenario).resolve().parent if args.relative else Path(".")
    for p in run_scenario(sc, base):
        log.info("wrote %s", p)
    return EXIT_OK


def _cmd_repro(args):
    rows = repro.repro_paper(args.out)
    sys.stdout.write(repro.format_table(rows))
    return EXIT_OK


def _cmd_sweep(args):
    if args.config:
        sc = scenario_mod.load(args.config)
        try:
            array = sc.array(args.array)
        except KeyError:
            raise ConfigError(f"no array named {args.array!r}", "--array") from None
    elif args.array in scenario_mod.PRESET_ARRAYS:
        array = scenario_mod.PRESET_ARRAYS[args.array]
    else:
        raise ConfigError(f"unknown preset {args.array!r}; choose from "
                          f"{', '.join(scenario_mod.PRESET_ARRAYS)} or pass --config", "--array")
    if not (0 < args.tmin <= args.tmax) or args.points < 1:
        raise ConfigError("need 0 < tmin <= tmax and points >= 1", "sweep-transport")
    sweep = scenario_mod.TransportSweep(array.name, args.tmin, args.tmax, args.points,
                                        args.distance_um, args.log, args.oracle, args.steps)
    buf = io.StringIO()
    write_transport_csv(transport_rows(array, sweep), buf)
    if args.out:
        Path(args.out).write_text(buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="microtrap", description=__doc__.split("\n")[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="execute a scenario file")
    r.add_argument("scenario")
    r.add_argument("--relative", action="store_true",
                   help="resolve output_dir and mask paths against the scenario's directory")
    r.set_defaults(func=_cmd_run)

    q = sub.add_parser("repro", help="recompute the headline numbers")
    q.add_argument("--out", required=True)
    q.set_defaults(func=_cmd_repro)

    s = sub.add_parser("sweep-transport", help="heating versus transport time")
    s.add_argument("--array", required=True, help="preset name (30um, 55um) or a name in --config")
    s.add_argument("--config")
    s.add_argument("--tmin", type=float, required=True)
    s.add_argument("--tmax", type=float, required=True)
    s.add_argument("--points", type=int, default=200)
    s.add_argument("--distance-um", type=float)
    s.add_argument("--log", action="store_true", help="log-spaced durations")
    s.add_argument("--oracle", action="store_true", help="add the RK4 column")
    s.add_argument("--steps", type=int, default=100_000)
    s.add_argument("--out")
    s.set_defaults(func=_cmd_sweep)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericError, FloatingPointError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, IndexError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
