"""Command-line interface.

Subcommands:
  solve     run one experiment (config JSON required; flags override keys)
  study     run the query-count scaling study over a list of d values
  validate  run the built-in property suites at reduced scale

Exit codes: 0 success, 1 infeasibility declared by a solve, 2 config
error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys

import numpy as np

from .harness import (
    ConfigError,
    ExperimentConfig,
    resolve_out_path,
    run_experiment,
    scaling_study,
    write_csv,
)

EXIT_OK = 0
EXIT_INFEASIBLE = 1
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def _add_common_flags(parser):
    parser.add_argument("--config", help="path to the JSON config document")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--algo", choices=["exact", "sampled"], dest="algorithm")
    parser.add_argument("--s", type=int)
    parser.add_argument("--eps", type=float)
    parser.add_argument("--delta", type=float)
    parser.add_argument("--out", help="CSV output path (relative paths land "
                                      "in $ROBUSTOPT_OUT_DIR when set)")


def _load_config(args, require_config=True):
    overrides = {key: getattr(args, key, None)
                 for key in ("seed", "algorithm", "s", "eps", "delta", "out")}
    if args.config:
        return ExperimentConfig.from_json_file(args.config, overrides)
    if require_config:
        raise ConfigError("--config is required for this subcommand")
    return ExperimentConfig.from_dict({}, overrides)


def _cmd_solve(args):
    config = _load_config(args)
    rows = run_experiment(config)
    for row in rows:
        violation = "" if row.max_violation is None else f" max_violation={row.max_violation:.6g}"
        print(f"seed={row.seed} status={row.status}{violation} "
              f"iterations={row.iterations} grad_queries={row.grad_queries} "
              f"proj_calls={row.proj_calls} opt_calls={row.opt_calls}")
    if config.out:
        print(f"wrote {resolve_out_path(config.out)}")
    if any(row.status == "infeasible" for row in rows):
        return EXIT_INFEASIBLE
    return EXIT_OK


def _cmd_study(args):
    config = _load_config(args, require_config=False)
    if args.eps is None and not args.config:
        # The default solve tolerance would make the sweep needlessly slow.
        config = dataclasses.replace(config, eps=0.3)
    d_values = args.d or [16, 64, 256, 1024]
    report = scaling_study(d_values, config, m=args.m)
    for record in report["records"]:
        print(f"d={record['d']} exact={record['exact']['grad_queries']} "
              f"sampled={record['sampled']['grad_queries']}")
    print(f"slope exact={report['slopes']['exact']:.3f} "
          f"sampled={report['slopes']['sampled']:.3f}")
    if config.out:
        path = resolve_out_path(config.out)
        with open(path, "w") as fh:
            json.dump(report, fh, indent=2)
        print(f"wrote {path}")
    return EXIT_OK


def _cmd_validate(args):
    from .validate import run_validation
    ok = run_validation(verbose=True, quick=args.quick)
    return EXIT_OK if ok else EXIT_RUNTIME


def build_parser():
    parser = argparse.ArgumentParser(prog="robustopt")
    sub = parser.add_subparsers(dest="command", required=True)

    solve = sub.add_parser("solve", help="solve one configured instance")
    _add_common_flags(solve)
    solve.set_defaults(func=_cmd_solve)

    study = sub.add_parser("study", help="query-count scaling study")
    _add_common_flags(study)
    study.add_argument("--d", type=int, nargs="+",
                       help="noise dimensions to sweep (default 16 64 256 1024)")
    study.add_argument("--m", type=int, default=5)
    study.set_defaults(func=_cmd_study)

    validate = sub.add_parser("validate", help="run the property suites")
    validate.add_argument("--quick", action="store_true",
                          help="smaller sample counts")
    validate.set_defaults(func=_cmd_validate)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
