"""Command line entry point: ``heavytail-conc <subcommand> [options]``."""

from __future__ import annotations

import argparse
import os
import sys

from .harness.experiment import ExperimentConfig, dumps_report, run_experiment

SUBCOMMANDS = ("verify", "tail-compare", "order-stats", "norms", "fit-constants", "run")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--json-out")
    p.add_argument("--csv-out")
    p.add_argument("--const", action="append", default=[], metavar="NAME=VALUE",
                   help="override a registry constant (repeatable)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="heavytail-conc",
                                     description="Concentration bounds for heavy-tailed product measures.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", help="empirical survival curve against a bound")
    _common(p)
    p.add_argument("--theorem", choices=["linear-weibull", "weibull-sharp", "weibull-robust",
                                         "power-lorentz", "power-lipp"])
    p.add_argument("--law")
    p.add_argument("--f", help="normalized-sum, l2norm, softmax[:beta], linear:<file|list>, plugin:mod:attr")
    p.add_argument("--n", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--t-grid", help="comma separated t values")
    p.add_argument("--q", type=float)
    p.add_argument("--p", type=float)

    p = sub.add_parser("tail-compare", help="tail certificates under convex domination")
    _common(p)
    p.add_argument("--op", choices=["witness", "conditional", "envelope", "ratio"])
    p.add_argument("--law")
    for name in ("t", "s", "x", "R", "p", "T"):
        p.add_argument(f"--{name}", type=float)

    p = sub.add_parser("order-stats", help="uniform order-statistic envelopes with coverage")
    _common(p)
    p.add_argument("--n", type=int)
    p.add_argument("--t", type=float)
    p.add_argument("--trials", type=int)
    p.add_argument("--branch", choices=["quadrature", "substituted", "fast-growth"])

    p = sub.add_parser("norms", help="Lorentz-type norms of a vector")
    _common(p)
    p.add_argument("--r", type=float)
    p.add_argument("--q", type=float)
    p.add_argument("--vector", help="inline list or @file (one real per line)")
    p.add_argument("--mode", choices=["exact", "generators", "approx"])

    p = sub.add_parser("fit-constants", help="refit registry constants by simulation")
    _common(p)
    p.add_argument("--cells", help="comma separated constant names, or 'all'")

    p = sub.add_parser("run", help="run the operation named in a config file")
    _common(p)
    return parser


def config_from_args(args) -> ExperimentConfig:
    data = {}
    if args.config:
        base = ExperimentConfig.from_file(args.config)
    else:
        base = ExperimentConfig()
    if args.command != "run":
        data["operation"] = args.command
    elif not args.config:
        raise SystemExit("run needs --config")
    skip = {"command", "config", "const"}
    for key, value in vars(args).items():
        if key in skip or value is None:
            continue
        if key == "vector" and not value.startswith("@") and "," not in value and " " not in value.strip():
            # a bare path is accepted too
            if os.path.isfile(value):
                value = "@" + value
        data[key] = value
    cfg = base
    for key, value in data.items():
        setattr(cfg, key, ExperimentConfig.from_mapping({key: value}).__dict__[key])
    for item in args.const:
        name, _, value = item.partition("=")
        cfg.overrides[name.strip()] = float(value)
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    report = run_experiment(cfg)
    if not cfg.json_out:
        sys.stdout.write(dumps_report(report))
    if report.get("status") == "error":
        print(f"error: {report['error']}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
