"""Command line: ``dfsrepeater run|verify|presets``.

Exit codes: 0 success, 1 verification failure, 2 usage or config error,
3 infeasible experiment.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import experiments as ex
from .presets import PRESETS
from .verify import SUITES, run_suites

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_INFEASIBLE = 0, 1, 2, 3

_FILE_KEYS = {"hardware", "noise", "chain", "search", "seed", "trials", "out"}


def load_config_file(path: str) -> dict:
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ex.ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ex.ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ex.ConfigError("config file must hold a JSON object")
    unknown = set(data) - _FILE_KEYS
    if unknown:
        raise ex.ConfigError(f"unknown config key(s): {sorted(unknown)}")
    for section in ("hardware", "noise", "chain", "search"):
        if not isinstance(data.get(section, {}), dict):
            raise ex.ConfigError(f"config section {section!r} must be an object")
    return data


def _check_seed(seed) -> int | None:
    if seed is None:
        return None
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2**64:
        raise ex.ConfigError(f"seed must be an integer in [0, 2^64), got {seed!r}")
    return seed


def build_config(args: argparse.Namespace) -> ex.ExperimentConfig:
    """Merge flags over the config file; the preset fills the rest later."""
    data = load_config_file(args.config) if args.config else {}
    overrides = {k: data[k] for k in ("hardware", "noise", "chain", "search") if k in data}
    seed = _check_seed(args.seed if args.seed is not None else data.get("seed"))
    trials = args.trials if args.trials is not None else data.get("trials", 0)
    if isinstance(trials, bool) or not isinstance(trials, int) or trials < 0:
        raise ex.ConfigError(f"trials must be a non-negative integer, got {trials!r}")
    if trials > 0 and seed is None:
        raise ex.ConfigError("Monte Carlo runs (trials > 0) need a seed")
    out = args.out if args.out is not None else data.get("out")
    return ex.ExperimentConfig(args.experiment, overrides, seed, out, trials,
                               plot=not args.no_plot)


def cmd_run(args) -> int:
    try:
        cfg = build_config(args)
        result = ex.run(cfg)
    except ex.ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ex.InfeasibleExperiment as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    for kind, path in result["paths"].items():
        print(f"{kind}: {path}")
    for key, value in result["summary"].items():
        print(f"{key}: {value}")
    return EXIT_OK


def cmd_verify(args) -> int:
    return EXIT_OK if run_suites(args.suite) else EXIT_VERIFY


def cmd_presets(args) -> int:
    for preset in PRESETS.values():
        print(f"{preset.name}:")
        print(json.dumps(preset.as_dict(), indent=2, sort_keys=True))
        print(f"  provenance: {preset.provenance}\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dfsrepeater", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a named experiment")
    run.add_argument("experiment", choices=sorted(ex.EXPERIMENTS))
    run.add_argument("--config", help="JSON file with hardware/noise/chain/search overrides")
    run.add_argument("--seed", type=int, help="seed for Monte Carlo columns")
    run.add_argument("--trials", type=int, help="Monte Carlo trials per sweep point")
    run.add_argument("--out", help="CSV path; the JSON sidecar and figure sit next to it")
    run.add_argument("--no-plot", action="store_true", help="skip the PNG figure")
    run.set_defaults(func=cmd_run)

    ver = sub.add_parser("verify", help="run the oracle suites")
    ver.add_argument("--suite", action="append", choices=sorted(SUITES),
                     help="suite to run (repeatable; default all)")
    ver.set_defaults(func=cmd_verify)

    pre = sub.add_parser("presets", help="list named parameter sets")
    pre.set_defaults(func=cmd_presets)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
