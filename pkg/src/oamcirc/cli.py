"""Command-line front end.

    oamcirc cyclic|spectra|waist-scan|design|validate [--config PATH] [--out DIR]
            [--threads N] [--strict|--lenient]

Exit codes: 0 ok, 1 configuration error, 2 physics or numerical error,
3 I/O error.
"""

from __future__ import annotations

import argparse
import datetime
import hashlib
import logging
import math
import sys
from importlib import metadata
from pathlib import Path

import numpy as np

from . import analysis, config, io
from .cavity import accumulated_gouy, linewidth_and_finesse
from .circuit import MEASURED_AVERAGE_EFFICIENCY, THREADS_ENV, default_threads, run_cyclic, tune_to_target
from .errors import ConfigError, PhysicsError
from .modes import ModeIndex

EXIT_OK, EXIT_CONFIG, EXIT_PHYSICS, EXIT_IO = 0, 1, 2, 3
SUBCOMMANDS = ("cyclic", "spectra", "waist-scan", "design", "validate")

log = logging.getLogger("oamcirc")


def _version() -> str:
    try:
        return metadata.version("oamcirc")
    except metadata.PackageNotFoundError:
        return "0+unknown"


def spec_summary(spec) -> dict:
    fsr, fwhm, finesse = linewidth_and_finesse(spec.cavity)
    cav = spec.cavity
    return {
        "input_modes": list(spec.input_modes),
        "target_l": spec.target_l,
        "output_modes": list(spec.output_modes),
        "wavelength_m": spec.wavelength,
        "laser_frequency_rad_s": spec.laser_frequency,
        "source_waist_m": spec.source_waist,
        "cavity_waist_m": spec.cavity_waist,
        "detection_waist_m": spec.detection_waist,
        "shift_fidelity": spec.shift_fidelity.value,
        "detection": spec.detection,
        "fsr_hz": fsr,
        "fwhm_hz": fwhm,
        "finesse": finesse,
        "optical_length_m": cav.optical_length,
        "geometric_length_m": cav.geometric_length,
        "gouy_phase_over_pi": accumulated_gouy(cav) / math.pi,
        "p_max": spec.truncation.p_max,
        "l_max": spec.truncation.l_max,
    }


# --------------------------------------------------------------------------
# subcommands: each returns (files: {name: text}, console text)


def cmd_cyclic(doc, threads):
    spec = tune_to_target(config.build_spec(doc))
    rep = run_cyclic(spec, threads)
    header = ["input_l"] + [f"out_{l}" for l in rep.output_modes]
    matrix = [[l] + list(row) for l, row in zip(rep.input_modes, rep.power_matrix)]
    eff = [[l, e] for l, e in zip(rep.input_modes, rep.efficiencies)]
    result = {
        "command": "cyclic",
        "spec": spec_summary(spec),
        "targets": list(rep.targets),
        "power_matrix": rep.power_matrix,
        "efficiencies": rep.efficiencies,
        "average_efficiency": rep.average_efficiency,
        "measured_reference": MEASURED_AVERAGE_EFFICIENCY,
        "deviation_from_reference": rep.average_efficiency - MEASURED_AVERAGE_EFFICIENCY,
        "row_argmax_on_target": [
            bool(int(np.argmax(rep.power_matrix[i])) == rep.target_column(i)) for i in range(len(rep.input_modes))
        ],
        "unaccounted_power": rep.unaccounted_power,
        "truncation_loss": rep.truncation_loss,
        "leaked_power": rep.leaked_power,
        "notes": sorted(set(rep.notes)),
    }
    files = {
        "power_matrix.csv": io.format_csv("power_matrix", header, matrix),
        "efficiencies.csv": io.format_csv("efficiencies", ["input_l", "efficiency"], eff),
        "result.json": io.format_json("result", result),
    }
    return files, rep.summary()


def cmd_spectra(doc, threads):
    spec = config.build_spec(doc)
    prep = config.build_preparation(doc, spec)
    grid = config.build_sweep(doc, spec)
    l_values = doc.get("sweep", "l_values")
    traces = analysis.wavelength_sweep(grid, l_values, spec.cavity, prep, threads=threads)
    files, peak_rows = {}, []
    for l in l_values:
        tr = traces[l]
        rows = zip(tr.wavelength * 1e9, tr.frequency_offset / 1e9, tr.transmission)
        files[f"spectrum_{l}.csv"] = io.format_csv(
            "spectrum", ["wavelength_nm", "frequency_offset_GHz", "transmission"], rows
        )
        peak_rows += [[l, pk.wavelength * 1e9, pk.frequency_offset / 1e9, pk.height] for pk in tr.peaks]
    files["peaks.csv"] = io.format_csv(
        "peaks", ["input_l", "wavelength_nm", "frequency_offset_GHz", "height"], peak_rows
    )
    target = ModeIndex(0, spec.target_l)
    lam_t = analysis.resonance_wavelength(spec.cavity, target, spec.wavelength)
    notes = sorted({n for tr in traces.values() for n in tr.notes})
    files["result.json"] = io.format_json(
        "result",
        {
            "command": "spectra",
            "spec": spec_summary(spec),
            "grid": {"start_m": grid.start, "stop_m": grid.stop, "steps": grid.steps},
            "target_resonance_wavelength_m": lam_t,
            "peak_count": {str(l): len(traces[l].peaks) for l in l_values},
            "notes": notes,
        },
    )
    return files, f"{len(l_values)} traces, {len(peak_rows)} peaks" + "".join(f"\n{n}" for n in notes)


def cmd_waist_scan(doc, threads):
    spec = config.build_spec(doc)
    grid = config.build_waist_grid(doc)
    l_values = sorted({abs(l) for l in doc.get("sweep", "l_values")})
    rows = analysis.waist_scan(
        l_values, grid.values(), spec.cavity, spec.cavity_waist, spec.wavelength, truncation=spec.truncation
    )
    table = [[r.l, r.source_waist * 1e6, r.transmission, r.p0_fraction] for r in rows]
    best = {str(l): analysis.best_p0_waist(l, spec.cavity_waist, grid.values()) for l in l_values if l}
    files = {
        "waist_scan.csv": io.format_csv("waist_scan", ["l", "source_waist_um", "transmission", "p0_fraction"], table),
        "result.json": io.format_json(
            "result",
            {"command": "waist-scan", "spec": spec_summary(spec), "best_p0_waist_m": best},
        ),
    }
    lines = [f"|l|={l}: largest p=0 fraction at source waist {w * 1e6:.2f} um" for l, w in best.items()]
    return files, "\n".join(lines)


def cmd_design(doc, threads):
    spec = config.build_spec(doc)
    bounds = config.build_bounds(doc)
    objective = doc.get("optimize", "objective")
    res = analysis.optimize_design(
        spec,
        objective,
        bounds,
        grid_points=doc.get("optimize", "grid_points"),
        sweeps=doc.get("optimize", "sweeps"),
        golden_iterations=doc.get("optimize", "golden_iterations"),
    )
    names = sorted(bounds)
    rows = [
        [i, name or "start"] + [point.get(n, math.nan) for n in names] + [value, best]
        for i, name, point, value, best in res.trace
    ]
    files = {
        "design.csv": io.format_csv(
            "design", ["evaluation", "parameter"] + names + ["objective", "best_so_far"], rows
        ),
        "result.json": io.format_json(
            "result",
            {
                "command": "design",
                "objective": objective,
                "value": res.value,
                "parameters": res.parameters,
                "spec": spec_summary(res.spec),
            },
        ),
    }
    return files, f"{objective} = {res.value!r} at {res.parameters}"


def cmd_validate(doc, threads):
    spec = tune_to_target(config.build_spec(doc))
    config.build_sweep(doc, spec)
    config.build_waist_grid(doc)
    extra = f" (ignored: {', '.join(doc.ignored)})" if doc.ignored else ""
    return {}, f"{doc.source}: ok{extra}"


COMMANDS = {
    "cyclic": cmd_cyclic,
    "spectra": cmd_spectra,
    "waist-scan": cmd_waist_scan,
    "design": cmd_design,
    "validate": cmd_validate,
}


def _manifest(args, files: dict) -> str:
    return io.format_json(
        "manifest",
        {
            "created": datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds"),
            "version": _version(),
            "command": args.command,
            "config": args.config or "<packaged paper.yaml>",
            "files": {name: hashlib.sha256(text.encode()).hexdigest() for name, text in sorted(files.items())},
        },
    )


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="oamcirc", description="OAM cyclic-transformation circuit simulator")
    p.add_argument("command", choices=SUBCOMMANDS)
    p.add_argument("--config", help="YAML config (default: packaged six-mode setup)")
    p.add_argument("--out", default=".", help="output directory (default: current directory)")
    p.add_argument("--threads", type=int, default=None, help=f"worker threads (default: ${THREADS_ENV} or 1)")
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--strict", dest="strict", action="store_true", default=True, help="reject unknown keys (default)")
    mode.add_argument("--lenient", dest="strict", action="store_false", help="ignore unknown keys")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    threads = default_threads() if args.threads is None else max(1, args.threads)
    try:
        doc = config.load_config(args.config, strict=args.strict)
        files, text = COMMANDS[args.command](doc, threads)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (PhysicsError, ValueError, FloatingPointError) as exc:
        print(f"physics error: {exc}", file=sys.stderr)
        return EXIT_PHYSICS

    try:
        if files:
            out = Path(args.out)
            out.mkdir(parents=True, exist_ok=True)
            for name, content in sorted(files.items()):
                io.write_text(out / name, content)
            if doc.get("output", "manifest"):
                io.write_text(out / "manifest.json", _manifest(args, files))
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    print(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
