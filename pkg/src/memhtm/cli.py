"""Command-line entry point: ``memhtm generate | run | sweep | cost``.

Successful commands exit 0.  Failures exit nonzero and print one JSON object
(``{"error": ..., "message": ..., "phase"?: ..., "path"?: ...}``) on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .core import ConfigError
from .datasets import DatasetError, generate_dataset
from .device import PRESETS, ProgrammingError
from .experiment import (ExperimentError, ExperimentSpec, parse_sweep, report_json, run_experiment, run_sweep,
                         spec_from_file, write_report)
from .pipeline import estimate_cost, pipeline_counts

EXIT_USAGE = 2
EXIT_FAILURE = 1


class CliError(Exception):
    def __init__(self, payload: dict, code: int):
        super().__init__(payload.get("message", ""))
        self.payload = payload
        self.code = code


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError({"error": "UsageError", "message": f"{self.prog}: {message}"}, EXIT_USAGE)


def _add_experiment_flags(p: argparse.ArgumentParser, dataset_required: bool = False):
    p.add_argument("--config", help="flat key=value config file")
    p.add_argument("--dataset", required=dataset_required, help="folder of class subfolders with PGM/CSV images")
    p.add_argument("--backend", choices=["ideal", "memristive"])
    p.add_argument("--preset", help=f"device preset ({', '.join(sorted(PRESETS))})")
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int, help="worker threads (results do not depend on it)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="memhtm", description="Memristive HTM pattern-recognition experiments.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="write the synthetic binary-pattern suite as PGM files")
    g.add_argument("--out", required=True, help="output folder")
    g.add_argument("--seed", type=int, default=42)
    g.add_argument("--classes", type=int, default=10)
    g.add_argument("--per-class", type=int, default=40)
    g.add_argument("--size", type=int, default=16)
    g.add_argument("--noise", type=float, default=0.05, help="fraction of flipped pixels per image")
    g.add_argument("--binary", action="store_true", help="write P5 instead of P2")

    r = sub.add_parser("run", help="train and evaluate one experiment")
    _add_experiment_flags(r)
    r.add_argument("--out", help="report folder (report.json, confusion.csv, timings.json); "
                                 "without it the report goes to stdout")

    s = sub.add_parser("sweep", help="run an experiment over a grid of settings")
    _add_experiment_flags(s)
    s.add_argument("--sweep", action="append", required=True, metavar="KEY=v1,v2,...",
                   help="one grid axis; repeat for a Cartesian grid")
    s.add_argument("--workers", type=int, default=1, help="grid points run in parallel")
    s.add_argument("--out", required=True, help="output folder")

    c = sub.add_parser("cost", help="area/power estimate from block counts")
    c.add_argument("--sp-blocks", type=int, default=0, help="number of 1x4 SP blocks")
    c.add_argument("--tm-cells", type=int, default=0, help="number of 1x1 TM cells")
    c.add_argument("--matcher-cells", type=int, default=0, help="number of 1x1 matcher cells")
    c.add_argument("--pipeline", nargs=3, type=int, metavar=("PIXELS", "BITS", "CLASSES"),
                   help="derive counts from a pipeline geometry instead")
    c.add_argument("--out", help="write the JSON result to this file as well")
    return parser


def _spec_from_args(args) -> ExperimentSpec:
    overrides = {k: getattr(args, k) for k in ("dataset", "backend", "preset", "seed", "threads")
                 if getattr(args, k, None) is not None}
    spec = spec_from_file(args.config, **overrides) if args.config else ExperimentSpec(dataset="").replace(**overrides)
    if not spec.dataset:
        raise ConfigError("no dataset given (use --dataset or a 'dataset' key in --config)")
    return spec


def _emit(obj, out: str | None = None):
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text, encoding="utf-8")
    sys.stdout.write(text)


def cmd_generate(args):
    if args.classes < 1 or args.per_class < 1 or args.size < 1 or not 0.0 <= args.noise <= 1.0:
        raise ConfigError("classes, per-class and size must be >= 1 and noise must lie in [0, 1]")
    out = generate_dataset(args.out, args.classes, args.per_class, args.size, args.noise, args.seed, args.binary)
    _emit({"dataset": str(out), "classes": args.classes, "per_class": args.per_class, "size": args.size,
           "noise": args.noise, "seed": args.seed})


def cmd_run(args):
    spec = _spec_from_args(args)
    report, timings = run_experiment(spec)
    if args.out:
        write_report(report, timings, args.out)
        _emit({"accuracy": report["accuracy"], "out": args.out})
    else:
        sys.stdout.write(report_json(report))


def cmd_sweep(args):
    spec = _spec_from_args(args)
    axes = parse_sweep(args.sweep)
    summary, results = run_sweep(spec, axes, workers=max(1, args.workers))
    out = Path(args.out)
    for point, (report, timings) in zip(summary["points"], results):
        write_report(report, timings, out / point["report"])
    (out / "sweep.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    _emit({"points": len(results), "out": str(out)})


def cmd_cost(args):
    if args.pipeline:
        counts = pipeline_counts(*args.pipeline)
    else:
        counts = {"sp_blocks_1x4": args.sp_blocks, "tm_cells_1x1": args.tm_cells,
                  "matcher_cells_1x1": args.matcher_cells}
    _emit({"counts": counts, **estimate_cost(counts)}, args.out)


_COMMANDS = {"generate": cmd_generate, "run": cmd_run, "sweep": cmd_sweep, "cost": cmd_cost}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        _COMMANDS[args.command](args)
        return 0
    except CliError as exc:
        payload, code = exc.payload, exc.code
    except ExperimentError as exc:
        payload, code = exc.to_dict(), EXIT_FAILURE
    except (ConfigError, DatasetError) as exc:
        payload, code = {"error": type(exc).__name__, "message": str(exc)}, EXIT_USAGE
    except (ProgrammingError, ValueError, OSError) as exc:
        payload, code = {"error": type(exc).__name__, "message": str(exc)}, EXIT_FAILURE
    sys.stderr.write(json.dumps(payload, sort_keys=True) + "\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
