"""Command line entry point: run scenarios, sweep parameters, verify.

    egf run <scenario-file> [--out DIR]
    egf sweep <scenario-file> --param NAME --values V1,V2,... [--out DIR] [--threads N]
    egf verify [--out DIR]

Exit codes: 0 success, 1 check failure, 2 parse error, 3 validation
error, 4 solver failure.
"""

from __future__ import annotations

import argparse
import sys

from .errors import SolverError, ValidationError
from .scenarios import ScenarioParseError, load_scenario

__all__ = ["main"]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="egf",
        description="Extrinsic geometric flow scenario runner",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one scenario file")
    p_run.add_argument("file", help="scenario file path")
    p_run.add_argument("--out", default="egf-out", help="artifact directory")

    p_sweep = sub.add_parser("sweep", help="run a scenario across parameter values")
    p_sweep.add_argument("file", help="base scenario file path")
    p_sweep.add_argument("--param", required=True, help="scalar key to vary")
    p_sweep.add_argument(
        "--values", required=True, help="comma-separated list of values"
    )
    p_sweep.add_argument("--out", default="egf-out", help="artifact root directory")
    p_sweep.add_argument("--threads", type=int, default=1, help="worker pool size")

    p_verify = sub.add_parser("verify", help="run the bundled acceptance suite")
    p_verify.add_argument(
        "--out", default=None, help="also write the report to DIR/acceptance.txt"
    )
    return parser


def _cmd_run(args) -> int:
    from .runner import run_scenario, write_artifacts

    try:
        scn = load_scenario(args.file)
    except FileNotFoundError as exc:
        print(f"egf: cannot read scenario: {exc}", file=sys.stderr)
        return 2
    except ScenarioParseError as exc:
        print(f"egf: parse error: {exc}", file=sys.stderr)
        return 2
    except ValidationError as exc:
        print(f"egf: invalid scenario: {exc}", file=sys.stderr)
        return 3
    try:
        result = run_scenario(scn)
    except ValidationError as exc:
        print(f"egf: invalid scenario: {exc}", file=sys.stderr)
        return 3
    except SolverError as exc:
        print(f"egf: solver failure: {exc}", file=sys.stderr)
        return 4
    write_artifacts(result, args.out)
    for check in result.checks:
        print(check.line())
    print(f"overall: {'pass' if result.passed else 'fail'} -> {args.out}")
    return result.exit_code


def _cmd_sweep(args) -> int:
    from .runner import sweep_values

    values = [v.strip() for v in args.values.split(",") if v.strip()]
    try:
        scn = load_scenario(args.file)
    except FileNotFoundError as exc:
        print(f"egf: cannot read scenario: {exc}", file=sys.stderr)
        return 2
    except ScenarioParseError as exc:
        print(f"egf: parse error: {exc}", file=sys.stderr)
        return 2
    except ValidationError as exc:
        print(f"egf: invalid scenario: {exc}", file=sys.stderr)
        return 3
    try:
        code, rows = sweep_values(scn, args.param, values, args.out, args.threads)
    except ScenarioParseError as exc:
        print(f"egf: parse error: {exc}", file=sys.stderr)
        return 2
    except ValidationError as exc:
        print(f"egf: invalid sweep: {exc}", file=sys.stderr)
        return 3
    except SolverError as exc:
        print(f"egf: solver failure: {exc}", file=sys.stderr)
        return 4
    for row in rows:
        print(f"{args.param}={row[0]}: final_sup={row[1]:.6e} verdict={row[4]}")
    print(f"sweep table -> {args.out}/sweep.csv")
    return code


def _cmd_verify(args) -> int:
    import os

    from .acceptance import run_all

    results = run_all()
    lines = []
    for res in results:
        lines.append(res.line())
        lines.extend(f"    {detail}" for detail in res.details)
    failed = [r for r in results if not r.passed]
    lines.append(f"{len(results) - len(failed)}/{len(results)} criteria passed")
    print("\n".join(lines))
    if args.out is not None:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "acceptance.txt"), "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")
    return 0 if not failed else 1


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "run":
        return _cmd_run(args)
    if args.command == "sweep":
        return _cmd_sweep(args)
    return _cmd_verify(args)


if __name__ == "__main__":
    sys.exit(main())
