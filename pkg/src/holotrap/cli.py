"""
Command-line front end.

    holotrap design   CONFIG            solve, export the hologram, simulate the device
    holotrap evaluate CONFIG --hologram H | --intensity CSV
    holotrap loadsim  CONFIG --report trap_report.json
    holotrap export   CONFIG --hologram H   lens term / rotation, device JSON

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
"""

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .config import load_config
from .errors import ConfigurationError, HolotrapError, TrapRangeError
from .optics import load_intensity_csv, propagate_to_focal, save_intensity_csv
from .physics import TrapReport, evaluate, load_sim
from .slm import (
    add_lens_phase,
    apply_device,
    export_hologram,
    import_hologram,
    intensity_to_pgm,
    lens_for_focus_shift,
    read_pgm,
    write_pgm,
)
from .solver import focal_intensity, solve

log = logging.getLogger("holotrap")

USAGE_ERRORS = (ConfigurationError, TrapRangeError)


def simulate_focal(mask, cfg):
    """Focal intensity of ``mask`` as displayed by the configured device."""
    ev = cfg.evaluation
    if not ev.simulate_device:
        return focal_intensity(mask, cfg.system)
    field = apply_device(mask, cfg.device, cfg.beam, cfg.system, ev.modulated_diameter, ev.gain)
    return propagate_to_focal(field, cfg.system).intensity


def _require_file(path, what):
    p = Path(path)
    if not p.is_file():
        raise ConfigurationError(f"{what} not found: {p}")
    return p


def cmd_design(cfg, args):
    if cfg.traps is None:
        raise ConfigurationError("config has no 'traps' entry")
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    mask, report = solve(cfg.traps, cfg.system, cfg.solver)
    holo = out / "hologram.pgm"
    export_hologram(mask, holo, cfg.device.pixels_per_side)
    # simulate what the device shows, i.e. the exported 8-bit image
    intensity = simulate_focal(import_hologram(holo, cfg.system), cfg)
    intensity_to_pgm(intensity, out / "intensity.pgm")
    save_intensity_csv(intensity, out / "intensity.csv")
    (out / "convergence.json").write_text(report.to_json())
    (out / "convergence.csv").write_text(report.to_csv())
    last = report.iterations - 1
    print(f"iterations: {report.iterations}")
    print(f"uniformity_deviation: {report.uniformity_deviation[last]:.4f}")
    print(f"efficiency: {report.efficiency[last]:.4f}")
    print(f"wrote {holo}")
    return 0


def cmd_evaluate(cfg, args):
    if (args.hologram is None) == (args.intensity is None):
        raise ConfigurationError("give exactly one of --hologram or --intensity")
    if args.hologram is not None:
        mask = import_hologram(_require_file(args.hologram, "hologram"), cfg.system)
        intensity = simulate_focal(mask, cfg)
    else:
        intensity = load_intensity_csv(_require_file(args.intensity, "intensity map"))
    report = evaluate(intensity, cfg.traps, cfg.system, cfg.loading, cfg.evaluation.total_power)
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    path = out / "trap_report.json"
    path.write_text(report.to_json())
    print(f"{'trap':<8} {'x_um':>8} {'y_um':>8} {'power_mW':>9} {'depth':>6}  above")
    for t in report.traps:
        print(f"{t.label:<8} {t.x * 1e6:8.3f} {t.y * 1e6:8.3f} {t.power * 1e3:9.3f} {t.depth_relative:6.3f}  {t.above_threshold}")
    print(f"zeroth order: {report.zeroth_order_power * 1e3:.3f} mW, above threshold: {report.zeroth_order_above_threshold}")
    print(f"wrote {path}")
    return 0


def cmd_loadsim(cfg, args):
    path = _require_file(args.report, "trap report")
    try:
        report = TrapReport.from_dict(json.loads(path.read_text()))
    except (ValueError, KeyError, TypeError) as e:
        raise ConfigurationError(f"{path} is not a trap report: {e}") from e
    stats = load_sim(report, cfg.loading, workers=args.workers)
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    dest = out / "occupancy.json"
    dest.write_text(stats.to_json())
    print(f"{'trap':<8} {'occupancy':>9}")
    for label, f in zip(stats.labels, stats.per_trap_frequency):
        print(f"{label:<8} {f:9.4f}")
    joint = "n/a" if stats.joint_all_occupied is None else f"{stats.joint_all_occupied:.4f}"
    print(f"all occupied: {joint}")
    print(f"mean atoms: {stats.mean_atom_number:.4f} ({stats.trials} trials, seed {stats.seed})")
    print(f"wrote {dest}")
    return 0


def cmd_export(cfg, args):
    src = _require_file(args.hologram, "hologram")
    ex = cfg.export
    f_lens = ex.lens_focal_length
    if args.lens_mm is not None:
        f_lens = args.lens_mm * 1e-3
    shift = ex.focus_shift if args.focus_shift_um is None else args.focus_shift_um * 1e-6
    if f_lens is None and shift is not None:
        f_lens = lens_for_focus_shift(shift, cfg.system)
    rotate = ex.rotate_deg if args.rotate_deg is None else args.rotate_deg
    if rotate % 90:
        raise ConfigurationError("rotation must be a multiple of 90 degrees")

    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    dest = out / "hologram_export.pgm"
    if f_lens is None:
        # no lens term: keep the gray levels untouched
        gray = read_pgm(src)
    else:
        mask = add_lens_phase(import_hologram(src, cfg.system), f_lens, cfg.system)
        gray = export_hologram(mask, dest, cfg.device.pixels_per_side)
    write_pgm(np.rot90(gray, k=(rotate // 90) % 4), dest)
    (out / "device.json").write_text(cfg.device.to_json())
    print(f"wrote {dest}")
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="holotrap", description="Holographic dipole-trap array design and evaluation.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, func, help):
        sp = sub.add_parser(name, help=help)
        sp.add_argument("config", help="JSON run configuration")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--iterations", type=int)
        sp.add_argument("--out", help="output directory (overrides the config)")
        sp.set_defaults(func=func)
        return sp

    add("design", cmd_design, "compute a hologram for the configured traps")
    sp = add("evaluate", cmd_evaluate, "evaluate traps from a hologram or an intensity map")
    sp.add_argument("--hologram")
    sp.add_argument("--intensity", help="intensity CSV on the focal grid")
    sp = add("loadsim", cmd_loadsim, "Monte Carlo trap loading")
    sp.add_argument("--report", required=True)
    sp.add_argument("--workers", type=int, default=1)
    sp = add("export", cmd_export, "add a lens term or rotate a hologram")
    sp.add_argument("--hologram", required=True)
    sp.add_argument("--lens-mm", type=float)
    sp.add_argument("--focus-shift-um", type=float)
    sp.add_argument("--rotate-deg", type=int)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        cfg = load_config(args.config).with_overrides(args.seed, args.iterations, args.out)
        return args.func(cfg, args)
    except USAGE_ERRORS as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (HolotrapError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
