"""Command-line entry point: ``platoonsim run|compare|plot``.

Exit codes: 0 success, 1 runtime failure, 2 usage or validation error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from .errors import ConfigError
from .io import load_config, write_received_csv, write_result

log = logging.getLogger("platoonsim")

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="platoonsim", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="subcommand", required=True)
    for name, helptext in (
        ("run", "run one scenario"),
        ("compare", "run a scenario over the ideal and the ITS-G5 channel"),
        ("plot", "render SVG charts from an output directory"),
    ):
        sp = sub.add_parser(name, help=helptext)
        sp.add_argument("--out", required=True, type=Path, help="output directory")
        if name != "plot":
            sp.add_argument("--config", required=True, type=Path, help="scenario JSON file")
            sp.add_argument("--seed", type=int, help="override the scenario seed")
            sp.add_argument("--channel", choices=("ideal", "itsg5"), help="override the channel")
    return p


def _load(args):
    if not args.config.is_file():
        raise UsageError(f"config file not found: {args.config}")
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.channel is not None:
        overrides["channel"] = args.channel
    return load_config(args.config, overrides)


def cmd_run(args) -> int:
    from .scenario import run_scenario

    cfg = _load(args)
    result = run_scenario(cfg)
    write_result(args.out, result)
    log.info("wrote %s", args.out)
    return EXIT_OK


def cmd_compare(args) -> int:
    from .scenario import compare_channels

    cfg = _load(args)
    cmp = compare_channels(cfg)
    write_result(args.out / "ideal", cmp.ideal, "ideal")
    write_result(args.out / "itsg5", cmp.itsg5, "itsg5")
    write_received_csv(args.out / "received_signal.csv", cmp.received_rows())
    log.info("wrote %s", args.out)
    return EXIT_OK


def cmd_plot(args) -> int:
    from .plotting import EmptyInputError, plot_received, plot_trace

    out = args.out
    if not out.is_dir():
        raise UsageError(f"output directory not found: {out}")
    dirs = [out] if (out / "trace.csv").exists() else [
        d for d in (out / "ideal", out / "itsg5") if (d / "trace.csv").exists()
    ]
    has_received = (out / "received_signal.csv").exists()
    if not dirs and not has_received:
        raise UsageError(f"no trace.csv or received_signal.csv under {out}")
    try:
        for d in dirs:
            plot_trace(d / "trace.csv", d)
        if has_received:
            plot_received(out / "received_signal.csv", out)
    except EmptyInputError as exc:
        raise UsageError(str(exc)) from exc
    return EXIT_OK


COMMANDS = {"run": cmd_run, "compare": cmd_compare, "plot": cmd_plot}


def main(argv: Optional[Sequence[str]] = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(name)s: %(message)s")
    args = _parser().parse_args(argv)
    try:
        return COMMANDS[args.subcommand](args)
    except (UsageError, ConfigError) as exc:
        print(f"platoonsim: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001
        print(f"platoonsim: runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
