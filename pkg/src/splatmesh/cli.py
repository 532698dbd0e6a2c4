"""Command line interface: ``splatmesh gen|verify|run|sweep|report|place|profile``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .arch import METHODS, method_profile
from .errors import ParseError, SplatMeshError
from .experiment import (
    PRESETS,
    SWEEPS,
    ExperimentPreset,
    get_presets,
    kernel_table,
    load_profile_arg,
    report_from_json,
    rows_to_markdown,
    run_experiment,
    run_presets,
    verify,
)
from .mapper import build_task_graph, place, validate_plio
from .workload import GaussianFile, default_camera, generate, load_camera, save_camera

MODES = {"analytic": ("analytic",), "event": ("event",), "both": ("analytic", "event")}


def _add_sim_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--mode", choices=sorted(MODES), default="both")
    p.add_argument("--fifo-depth", type=int, default=None, help="edge buffer depth in Gaussian payloads")
    p.add_argument("--external-cap", type=float, default=None, metavar="MB_PER_S",
                   help="cap on input throughput in MB/s (10^6 bytes/s)")
    p.add_argument("--no-transfer", action="store_true", help="ignore inter-kernel transfer cycles")
    p.add_argument("--jitter", action="store_true", help="draw event-mode kernel cycles from [min, max]")
    p.add_argument("--sequential", action="store_true", help="run a unit's kernels back to back")
    p.add_argument("--out", type=Path, default=None, help="directory for JSON/CSV/markdown reports")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="splatmesh", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a random Gaussian file")
    p.add_argument("--count", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--camera", type=Path, default=None, help="also write the default camera JSON here")

    p = sub.add_parser("verify", help="check the staged kernels against the scalar oracle")
    p.add_argument("file", type=Path)
    p.add_argument("--camera", type=Path, default=None, help="camera JSON (default: built-in camera)")
    p.add_argument("--tolerance", type=float, default=1e-5)
    p.add_argument("--json", action="store_true", help="print the report as JSON")

    p = sub.add_parser("run", help="simulate one preset or an explicit configuration")
    p.add_argument("--preset", choices=sorted(PRESETS), default=None)
    p.add_argument("--method", choices=METHODS, default=None)
    p.add_argument("--units", type=int, nargs="+", default=[1])
    p.add_argument("--profile", default="calibrated",
                   help="'calibrated', 'analytic', or a profile INI file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-gaussians", type=int, default=10_000)
    _add_sim_flags(p)

    p = sub.add_parser("sweep", help="simulate a preset grid")
    p.add_argument("--preset", choices=sorted(SWEEPS), default="full")
    p.add_argument("--profile", choices=("calibrated", "analytic"), default="calibrated")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-gaussians", type=int, default=10_000)
    _add_sim_flags(p)

    p = sub.add_parser("report", help="reformat an experiment JSON report")
    p.add_argument("file", type=Path)
    p.add_argument("--format", choices=("csv", "markdown"), default="markdown")
    p.add_argument("--out", type=Path, default=None)

    p = sub.add_parser("place", help="show the mesh placement for a method")
    p.add_argument("--method", choices=METHODS, default="window")
    p.add_argument("--units", type=int, default=1)

    p = sub.add_parser("profile", help="print a method's kernel cost profile as INI")
    p.add_argument("--method", choices=METHODS, default="window")
    p.add_argument("--source", choices=("calibrated", "analytic"), default="calibrated")
    p.add_argument("--out", type=Path, default=None)
    return parser


def _overrides(args) -> dict:
    cap = args.external_cap * 1e6 if args.external_cap is not None else None
    return {
        "fifo_depth": args.fifo_depth,
        "external_cap": cap,
        "transfer": not args.no_transfer,
        "jitter": args.jitter,
        "pipelined": not args.sequential,
    }


def _emit(presets, args, overrides, name=None) -> None:
    modes = MODES[args.mode]
    if args.out is not None:
        paths = run_experiment(presets, args.out, name=name, modes=modes, **overrides)
        for kind, path in paths.items():
            print(f"{kind}: {path}")
        return
    result = run_presets(presets, modes, **overrides)
    print(kernel_table(result.reports))
    print(rows_to_markdown(result.rows), end="")


def cmd_gen(args) -> int:
    gfile = generate(args.count, args.seed)
    gfile.write(args.out)
    if args.camera is not None:
        save_camera(default_camera(), args.camera)
    print(f"wrote {gfile.count} Gaussians to {args.out}")
    return 0


def cmd_verify(args) -> int:
    gfile = GaussianFile.read(args.file)
    cam = load_camera(args.camera) if args.camera else default_camera()
    rep = verify(gfile, cam, args.tolerance)
    print(json.dumps(rep.to_dict(), indent=2, sort_keys=True) if args.json else rep.summary())
    return 0 if rep.passed else 1


def cmd_run(args) -> int:
    if args.preset and args.method:
        raise SystemExit("error: give either --preset or --method, not both")
    if args.preset:
        presets = get_presets(args.preset)
        name = args.preset
    else:
        method = args.method or "window"
        source = args.profile if args.profile in ("calibrated", "analytic") else "calibrated"
        name = f"{method}-" + "-".join(str(n) for n in args.units)
        presets = (ExperimentPreset(name, method, tuple(args.units), source, args.n_gaussians, args.seed),)
    overrides = _overrides(args)
    if args.preset is None:
        overrides["profile"] = load_profile_arg(args.profile, presets[0].method)
    _emit(presets, args, overrides, name)
    return 0


def cmd_sweep(args) -> int:
    presets = tuple(
        ExperimentPreset(p.name, p.method, p.unit_counts, args.profile, args.n_gaussians, args.seed)
        for p in get_presets(args.preset)
    )
    _emit(presets, args, _overrides(args), args.preset)
    return 0


def cmd_report(args) -> int:
    text = report_from_json(args.file, args.format)
    if args.out is not None:
        args.out.write_text(text)
    else:
        print(text, end="")
    return 0


def cmd_place(args) -> int:
    graph = build_task_graph(partitioned=args.method != "naive")
    placement = place(graph, args.units)
    plio = validate_plio(placement)
    print(placement.report())
    print(f"PLIO streams {plio.total_streams}, {'ok' if plio.passed else 'over budget in columns ' + str(plio.violations)}")
    return 0


def cmd_profile(args) -> int:
    text = method_profile(args.method, args.source).to_ini()
    if args.out is not None:
        args.out.write_text(text)
    else:
        print(text, end="")
    return 0


COMMANDS = {
    "gen": cmd_gen,
    "verify": cmd_verify,
    "run": cmd_run,
    "sweep": cmd_sweep,
    "report": cmd_report,
    "place": cmd_place,
    "profile": cmd_profile,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return 2
    except (SplatMeshError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
