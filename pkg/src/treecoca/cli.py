"""``treecoca`` command-line entry point.

Exit codes: 0 success, 1 configuration error, 2 runtime error, 3 bound violation.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from treecoca import config as cfgmod
from treecoca import harness
from treecoca.data import CsvError
from treecoca.model import PartitionError, TopologyError
from treecoca.plotting import KINDS, emit_plot_script

log = logging.getLogger("treecoca")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_BOUND = 0, 1, 2, 3


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", required=True, type=Path, help="JSON config (or a harness CSV)")
    p.add_argument("--seed", type=int, help="single solver seed (overrides the config)")
    p.add_argument("--seeds", help="seed range N..M, inclusive (overrides the config)")
    p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    p.add_argument("--deterministic", action="store_true", help="omit the timestamp line from CSVs")
    p.add_argument("--debug-consistency", action="store_true",
                   help="check w == A alpha at every node call (slow)")
    p.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=JSON",
                   help="override one config value, e.g. --set solver.R=100")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="treecoca", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in [
        ("run", "run the solver and write trace CSVs"),
        ("sweep-h", "time-to-target-gap over a grid of H and delay ratios"),
        ("optimize-h", "optimal H per delay ratio from the predicted-gap model"),
        ("bound-overlay", "mean suboptimality over seeds against the convergence bound"),
    ]:
        _common(sub.add_parser(name, help=help_))
    plot = sub.add_parser("plot", help="write a matplotlib script for harness CSVs")
    plot.add_argument("csv", nargs="+", type=Path)
    plot.add_argument("--kind", choices=KINDS, default="gap-vs-time")
    plot.add_argument("--out", type=Path, default=Path("plot.py"), help="script path")
    plot.add_argument("--image", type=Path, help="image the script saves (default: script path with .png)")
    return parser


def _overrides(args: argparse.Namespace) -> dict:
    import json

    out = {}
    if args.seed is not None:
        out["solver.seed"] = args.seed
    if args.seeds:
        out["solver.seeds"] = cfgmod.parse_seed_range(args.seeds)
    for item in args.set:
        key, sep, value = item.partition("=")
        if not sep or "." not in key:
            raise cfgmod.ConfigError(f"--set expects SECTION.KEY=VALUE, got {item!r}")
        try:
            out[key] = json.loads(value)
        except json.JSONDecodeError:
            out[key] = value
    return out


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")

    if args.command == "plot":
        try:
            path = emit_plot_script(args.csv, args.kind, args.out, args.image)
        except (FileNotFoundError, ValueError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        print(path)
        return EXIT_OK

    try:
        overrides = _overrides(args)
        if args.seed is not None and args.seeds:
            raise cfgmod.ConfigError("give --seed or --seeds, not both")
        raw = cfgmod.read_config(args.config)
        if args.seed is not None:
            raw.get("solver", {}).pop("seeds", None)
        base_dir = args.config.resolve().parent
        cfg = cfgmod.absolutize_paths(cfgmod.resolve(raw, overrides), base_dir)
        opts = dict(deterministic=args.deterministic)
        if args.command == "run":
            out = harness.cmd_run(cfg, args.out, check=args.debug_consistency, base_dir=base_dir, **opts)
            for p in out.paths:
                print(p)
        elif args.command == "sweep-h":
            res = harness.cmd_sweep_h(cfg, args.out, check=args.debug_consistency, base_dir=base_dir, **opts)
            print(res.long_path)
            print(res.summary_path)
        elif args.command == "optimize-h":
            path, _ = harness.cmd_optimize_h(cfg, args.out, **opts)
            print(path)
        elif args.command == "bound-overlay":
            res = harness.cmd_bound_overlay(cfg, args.out, check=args.debug_consistency, base_dir=base_dir, **opts)
            print(res.path)
    except harness.BoundViolation as exc:
        print(f"bound violation: {exc}", file=sys.stderr)
        return EXIT_BOUND
    except (cfgmod.ConfigError, TopologyError, PartitionError, CsvError, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (TypeError, ValueError, KeyError) as exc:
        # malformed values inside an otherwise readable config
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001
        log.debug("runtime failure", exc_info=True)
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
