"""Command line entry point: ``nslab run|plot|list-scenarios|validate``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

from . import __version__
from .config import ConfigError, load_config
from .scenarios import SCENARIOS, run_scenario

log = logging.getLogger("nslab")

EXIT_OK, EXIT_ASSERT, EXIT_CONFIG = 0, 1, 2


def cmd_run(args) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    outdir = Path(args.out or cfg.output)
    outdir.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    try:
        result = run_scenario(cfg, outdir)
    except ValueError as exc:
        # domain checks the schema cannot see, e.g. sigma below two spacings
        print(f"error: {cfg.source}: invalid parameters: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    wall = time.perf_counter() - t0
    index = {
        "scenario": cfg.scenario,
        "version": __version__,
        "config": cfg.as_dict(),
        "config_sha1": cfg.content_hash(),
        "files": sorted(result.files),
        "assertions": [a.as_dict() for a in result.assertions],
        "passed": all(a.passed for a in result.assertions),
        "summary": result.summary,
        "wall_time_s": wall,
    }
    (outdir / "index.json").write_text(json.dumps(index, indent=2, sort_keys=True) + "\n")
    (outdir / "config.toml").write_text(cfg.to_toml())
    for a in result.assertions:
        if not args.quiet or not a.passed:
            print(f"{'PASS' if a.passed else 'FAIL'} {a.name}: {a.value:.6g} "
                  f"(threshold {a.threshold:.6g}){' ' + a.detail if a.detail else ''}")
    failed = [a.name for a in result.assertions if not a.passed]
    if failed:
        print(f"assertion failed: {', '.join(failed)}", file=sys.stderr)
        return EXIT_ASSERT
    if not args.quiet:
        print(f"{cfg.scenario}: {len(result.assertions)} assertions passed in {wall:.2f} s; "
              f"output in {outdir}")
    return EXIT_OK


def cmd_validate(args) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"{args.config}: ok ({cfg.scenario}, sha1 {cfg.content_hash()})")
    if args.echo:
        sys.stdout.write(cfg.to_toml())
    return EXIT_OK


def cmd_list(args) -> int:
    width = max(len(n) for n in SCENARIOS)
    for name in sorted(SCENARIOS):
        print(f"{name:<{width}}  {SCENARIOS[name][0]}")
    return EXIT_OK


def cmd_plot(args) -> int:
    from .plotting import plot_run

    paths = plot_run(args.dir)
    for p in paths:
        print(p)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nslab", description=(
        "Self-gravitating wave equations versus the linear many-body Hamiltonian."))
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run the scenario named in a config file")
    p.add_argument("config")
    p.add_argument("--out", help="output directory (overrides 'output' in the config)")
    p.add_argument("-q", "--quiet", action="store_true", help="only report failures")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("plot", help="render SVG figures for a run directory")
    p.add_argument("dir")
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("list-scenarios", help="list the available scenarios")
    p.set_defaults(func=cmd_list)

    p = sub.add_parser("validate", help="check a config without running it")
    p.add_argument("config")
    p.add_argument("--echo", action="store_true", help="print the resolved config")
    p.set_defaults(func=cmd_validate)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
