"""Command-line driver: ``hypokfp <suite> [--config FILE] [--out DIR] ...``.

Exit codes: 0 all checks pass, 1 a check failed, 2 usage or config error
(nothing is written), 3 a quadrature tolerance failure.
"""
from __future__ import annotations

import argparse
import os
import sys

from .config import SUITES, load_config
from .errors import ToleranceError, UsageError
from .report import report_schema_version
from .suites import run_suite

__all__ = ["main", "run", "report_schema_version"]

EXIT_OK, EXIT_INVARIANT, EXIT_USAGE, EXIT_TOLERANCE = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="hypokfp", description="Verification suites for the KFP operator toolkit.")
    p.add_argument("suite", choices=SUITES + ("all",))
    p.add_argument("--config", help="INI experiment config (defaults apply to missing keys)")
    p.add_argument("--out", default=None,
                   help="report directory (default: $HYPOKFP_OUT or ./reports)")
    p.add_argument("--seed", type=int, default=None, help="override [general] seed")
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    p.add_argument("--tolerance", type=float, default=None, help="override every check tolerance")
    return p


def run(suites, cfg, out_dir, jobs: int = 1, log=print) -> int:
    """Run ``suites`` in order, writing one JSON and one CSV report per suite."""
    code = EXIT_OK
    for name in suites:
        try:
            rep = run_suite(name, cfg, jobs)
        except ToleranceError as exc:
            log(f"[{name}] tolerance failure: {exc}")
            return EXIT_TOLERANCE
        rep.write(out_dir)
        for c in rep.checks:
            d = c.to_dict()
            log(f"[{name}] {'PASS' if c.passed else 'FAIL'} {c.label}: {d['value']!r} (bound {d['bound']!r})")
        if not rep.passed:
            code = EXIT_INVARIANT
    return code


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.jobs < 1:
            raise UsageError("--jobs must be >= 1")
        if args.seed is not None and not 0 <= args.seed < 2 ** 64:
            raise UsageError("--seed must be an unsigned 64-bit integer")
        if args.tolerance is not None and not args.tolerance > 0:
            raise UsageError("--tolerance must be positive")
        cfg = load_config(args.config).with_overrides(args.seed, args.tolerance)
        out = args.out or os.environ.get("HYPOKFP_OUT") or "reports"
        if os.path.exists(out) and not os.path.isdir(out):
            raise UsageError(f"--out {out!r} exists and is not a directory")
    except UsageError as exc:
        print(f"hypokfp: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    suites = SUITES if args.suite == "all" else (args.suite,)
    return run(suites, cfg, out, args.jobs)


if __name__ == "__main__":
    sys.exit(main())
