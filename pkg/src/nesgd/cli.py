"""Command line interface.

    ne-sgd run --config <path> [--parallel N] [--out <dir>]
    ne-sgd baseline --config <path> --repeats K [--out <dir>]
    ne-sgd report --dir <path>

``--config`` takes a file path or the name of a shipped preset ("desk" or
"paper"). The environment variable NE_SGD_SEED overrides the config seed.
Exit codes: 0 success, 1 runtime failure (partial logs stay on disk),
2 configuration error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from importlib import resources
from pathlib import Path

from .config import load_experiment_config
from .errors import ConfigurationError, NesgdError
from .harness import run_baseline, run_experiment, write_report

logger = logging.getLogger("nesgd")


def preset_text(name: str) -> str | None:
    stem = name[: -len(".preset")] if name.endswith(".preset") else name
    candidate = resources.files("nesgd").joinpath(f"presets/{stem}.preset")
    if candidate.is_file():
        return candidate.read_text(encoding="utf-8")
    return None


def load_config(spec: str):
    path = Path(spec)
    if path.exists():
        return load_experiment_config(path)
    text = preset_text(spec)
    if text is not None:
        from .config import parse_config_text, resolve_config

        return resolve_config(parse_config_text(text))
    raise ConfigurationError(f"config {spec!r} is neither a file nor a shipped preset")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ne-sgd", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="execute an evolutionary run")
    run_p.add_argument("--config", required=True, help="config file or preset name")
    run_p.add_argument("--parallel", type=int, default=None, help="0 = auto, 1 = serial")
    run_p.add_argument("--out", default=None, help="output directory (default: config output.dir)")

    base_p = sub.add_parser("baseline", help="repeated plain-SGD training study")
    base_p.add_argument("--config", required=True)
    base_p.add_argument("--repeats", type=int, default=None)
    base_p.add_argument("--out", default=None)

    report_p = sub.add_parser("report", help="render SVG and text report from run logs")
    report_p.add_argument("--dir", required=True, help="run directory with generations.csv")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(message)s", stream=sys.stderr)
    try:
        if args.command == "run":
            config = load_config(args.config)
            result = run_experiment(config, out_dir=args.out, parallel=args.parallel)
            out = args.out if args.out is not None else config.output_dir
            print(
                f"best fitness {result.best.raw_fitness:.6g} "
                f"(individual {result.best.id}, genome {result.best.genome.text}); "
                f"artifacts in {out}"
            )
        elif args.command == "baseline":
            config = load_config(args.config)
            if args.repeats is not None and args.repeats < 1:
                raise ConfigurationError(f"--repeats must be >= 1, got {args.repeats}")
            summary = run_baseline(config, out_dir=args.out, repeats=args.repeats)
            out = args.out if args.out is not None else config.output_dir
            print(
                f"baseline median {summary['median']:.6g} "
                f"(stdev {summary['standard deviation']:.3g}); artifacts in {out}"
            )
        else:
            svg_path, txt_path = write_report(args.dir)
            print(f"wrote {svg_path} and {txt_path}")
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (NesgdError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


def entry() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    entry()
