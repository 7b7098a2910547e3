"""
Command line entry point.

    isac sim --scenario ber_flat --snr 20,25,30 --trials 100 --out results/

Every config key has a matching ``--flag`` (underscores become dashes).
Exit codes: 0 success, 2 configuration error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys

from .config import SCENARIOS, ConfigError, ExperimentConfig, build_config, parse_value, read_config_file
from .runner import run_experiment

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3

# short flag names for the keys users touch most
ALIASES = {"snr_grid": "--snr"}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="isac", description="FM-OFDM sensing and communication simulations")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sim = sub.add_parser("sim", help="run one scenario")
    sim.add_argument("--config", help="key = value configuration file")
    sim.add_argument("-v", "--verbose", action="store_true")
    for f in dataclasses.fields(ExperimentConfig):
        flags = ["--" + f.name.replace("_", "-")]
        if f.name in ALIASES:
            flags.insert(0, ALIASES[f.name])
        kwargs = {"dest": f.name, "default": None, "metavar": f.name.upper()}
        if f.name == "scenario":
            kwargs["choices"] = SCENARIOS
            kwargs.pop("metavar")
        sim.add_argument(*flags, **kwargs)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        file_values = read_config_file(args.config) if args.config else {}
        overrides = {
            f.name: parse_value(f.name, getattr(args, f.name))
            for f in dataclasses.fields(ExperimentConfig)
            if getattr(args, f.name) is not None
        }
        cfg = build_config(file_values, overrides)
    except ConfigError as exc:
        print(f"isac: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"isac: cannot read config: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        res = run_experiment(cfg)
    except OSError as exc:
        print(f"isac: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    for path in res.artifacts:
        print(path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
