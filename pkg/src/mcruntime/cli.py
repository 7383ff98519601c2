"""Command-line front end.

Exit codes: 0 success, 1 configuration or usage error, 2 runtime failure.
"""
from __future__ import annotations

import argparse
import sys

from .experiments import (
    CellFailures,
    ConfigError,
    DatasetRef,
    ExperimentConfig,
    cmd_adhoc,
    cmd_type1,
    cmd_type2,
)
from .stats_report import render

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _protocols(text: str) -> list[str]:
    if text.lower() == "both":
        return ["HE", "MPC"]
    return [t.strip().upper() for t in text.split(",") if t.strip()]


def _dataset(text: str) -> DatasetRef:
    """``[NAME=]PATH:COLUMN``"""
    name, _, rest = text.rpartition("=") if "=" in text else ("", "", text)
    path, sep, column = rest.rpartition(":")
    if not sep or not path or not column:
        raise argparse.ArgumentTypeError(f"expected [NAME=]PATH:COLUMN, got {text!r}")
    return DatasetRef(name or path, path, column)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="mcruntime", description="Monte Carlo runtime estimation for private mean protocols.")
    p.add_argument("--config", help="JSON config file; flags override its values")
    p.add_argument("--experiment", choices=["type1", "type2", "adhoc"])
    p.add_argument("--protocol", type=_protocols, help="HE, MPC, HE,MPC or both")
    p.add_argument("--m", type=_int_list, help="iteration counts, e.g. 1000,5000")
    p.add_argument("--sizes", type=_int_list, help="dataset sizes for distribution runs")
    p.add_argument("--dist", help="comma list of uniform|normal|gamma|beta or family:p1:p2[:scale]")
    p.add_argument("--dataset", type=_dataset, action="append", help="[NAME=]PATH:COLUMN (repeatable)")
    p.add_argument("--delimiter", help="CSV delimiter for --dataset files")
    p.add_argument("--values", type=_int_list, help="literal dataset for adhoc runs")
    p.add_argument("--parties", type=int)
    p.add_argument("--key-bits", type=int)
    p.add_argument("--modulus", type=int)
    p.add_argument("--mode", choices=["paper_faithful", "exact"])
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output directory for reports and raw samples")
    p.add_argument("--format", choices=["markdown", "csv", "json"])
    p.add_argument("--smoke", action="store_true", default=None, help="scale M and sizes down 100x")
    p.add_argument("--parallel-cells", action="store_true", default=None)
    p.add_argument("--scheduling", choices=["sequential", "concurrent"])
    p.add_argument("--clock", choices=["monotonic", "tick"],
                   help="tick: deterministic fake clock for reproducibility checks")
    p.add_argument("--fit-on", choices=["samples", "aggregates"])
    p.add_argument("--transcript", help="adhoc: write JSON-lines transcripts with this path prefix")
    p.add_argument("--verbose", action="store_true", default=None)
    return p


_SIMPLE = {
    "experiment": "experiment", "protocol": "protocols", "m": "m_values", "sizes": "sizes",
    "values": "values", "parties": "parties", "key_bits": "key_bits", "modulus": "modulus",
    "mode": "mode", "seed": "seed", "out": "out", "format": "format", "smoke": "smoke",
    "parallel_cells": "parallel_cells", "scheduling": "scheduling", "clock": "clock",
    "fit_on": "fit_on", "transcript": "transcript", "verbose": "verbose",
}


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    cfg = ExperimentConfig.from_file(args.config) if args.config else ExperimentConfig()
    for flag, attr in _SIMPLE.items():
        value = getattr(args, flag)
        if value is not None:
            setattr(cfg, attr, value)
    if args.dist is not None:
        cfg.distributions = [d.strip() for d in args.dist.split(",") if d.strip()]
    if args.dataset:
        if args.delimiter:
            for ref in args.dataset:
                ref.delimiter = args.delimiter
        cfg.datasets = args.dataset

    given = [name for name, v in (("--values", args.values), ("--dataset", args.dataset),
                                   ("--dist", args.dist)) if v is not None]
    if cfg.experiment == "adhoc":
        if len(given) > 1:
            raise UsageError(f"choose one dataset source for adhoc runs, got {' and '.join(given)}")
        if given:
            cfg.source = {"--values": "values", "--dataset": "dataset", "--dist": "dist"}[given[0]]
    elif cfg.experiment == "type1" and args.dist is not None:
        raise UsageError("--dist applies to type2 and adhoc runs")
    elif cfg.experiment == "type2" and args.dataset:
        raise UsageError("--dataset applies to type1 and adhoc runs")
    return cfg


def _print_adhoc(results) -> None:
    for r in results:
        print(f"{r.protocol}: mean={r.value} M={r.client.M} "
              f"theta_cli={r.client.theta_hat:.4f}ms var_cli={r.client.var_hat:.3e} "
              f"theta_srv={r.server.theta_hat:.4f}ms var_srv={r.server.var_hat:.3e}")


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # --help or an argparse usage error
        return exc.code if isinstance(exc.code, int) else EXIT_CONFIG
    try:
        cfg = config_from_args(args)
        cfg.validate()
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"{parser.prog}: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConfigError as exc:
        parser.print_usage(sys.stderr)
        for problem in exc.problems:
            print(f"{parser.prog}: error: {problem}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        if cfg.experiment == "type1":
            print(render(cmd_type1(cfg), cfg.format), end="")
        elif cfg.experiment == "type2":
            table, _ = cmd_type2(cfg)
            print(render(table, cfg.format), end="")
        else:
            _print_adhoc(cmd_adhoc(cfg))
    except CellFailures as exc:
        if exc.table is not None and exc.table.rows:
            print(render(exc.table, cfg.format), end="")
        for name, err in exc.failures:
            print(f"cell failed: {name}: {err!r}", file=sys.stderr)
        return EXIT_RUNTIME
    except ConfigError as exc:
        for problem in exc.problems:
            print(f"{parser.prog}: error: {problem}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:
        print(f"{parser.prog}: runtime failure: {exc!r}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
