"""Command line: ``entroflux run | sweep | verify``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .errors import (
    ConditioningError,
    DegeneracyError,
    InputError,
    IntegrationError,
    PhysicalityError,
    RecurrenceError,
    SemanticsError,
    TruncationError,
)

EXIT_OK = 0
EXIT_FAILED_CHECKS = 1
EXIT_CONFIG = 2
EXIT_REFUSED = 3
EXIT_NUMERICAL = 4

log = logging.getLogger("entroflux")


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="entroflux", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run the engines of one scenario")
    r.add_argument("scenario")
    r.add_argument("--out", default="entroflux_out", help="output directory (default: %(default)s)")

    s = sub.add_parser("sweep", help="run a scenario over its parameter grid")
    s.add_argument("scenario")
    s.add_argument("--out", default="entroflux_sweep", help="output directory (default: %(default)s)")
    s.add_argument("--jobs", type=int, default=1, help="worker processes")

    v = sub.add_parser("verify", help="run the acceptance suites")
    v.add_argument("--suite", choices=["thermal", "squeezed", "micro", "gksl", "all"], default="all")
    v.add_argument("--report", help="also write the results as JSON")
    return p


def _dispatch(args) -> int:
    if args.command == "verify":
        from .verify import run_suite

        results = run_suite(args.suite)
        for res in results:
            print(res.line(), flush=True)
        if args.report:
            from .runner import write_atomic

            payload = [{k: getattr(res, k) for k in ("key", "title", "passed", "value", "tolerance", "detail", "seconds")}
                       for res in results]
            write_atomic(args.report, json.dumps(payload, indent=2) + "\n")
        return EXIT_OK if all(r.passed for r in results) else EXIT_FAILED_CHECKS

    from .runner import Scenario, run, sweep

    scen = Scenario.load(args.scenario)
    if args.command == "run":
        manifest = run(scen, args.out)
    else:
        if args.jobs < 1:
            raise InputError("--jobs must be >= 1")
        manifest = sweep(scen, args.out, args.jobs)
    print(json.dumps({"outputs": manifest["outputs"], "assertions": manifest["assertions"]}, indent=2))
    return EXIT_OK


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return _dispatch(args)
    except (SemanticsError, RecurrenceError) as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return EXIT_REFUSED
    except (IntegrationError, TruncationError, ConditioningError, DegeneracyError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (InputError, PhysicalityError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
