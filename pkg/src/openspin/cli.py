"""Command-line entry point.

    openspin <task> --config run.json [--set chain.sites=2] [--exact] [--out report.json]

Exit status: 0 when every asserted check passes, 1 when a check fails (the
report is still written), 2 for configuration errors, 3 when the Hilbert
space exceeds the dimension cap.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .chain import DimensionCapError
from .reports import TASKS, ConfigError, RunConfig, run, write_outputs

EXIT_OK, EXIT_CHECK_FAILED, EXIT_CONFIG, EXIT_DIMENSION = 0, 1, 2, 3

log = logging.getLogger("openspin")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="openspin", description="Verification and Bethe-ansatz reports for rational sl(M|N) spin chains.")
    p.add_argument("task", choices=TASKS, help="pipeline to run")
    p.add_argument("--config", required=True, help="JSON run configuration")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE", help="override a config field (dotted path, JSON value); repeatable")
    p.add_argument("--exact", action="store_true", help="also run the exact (rational) backend where available")
    p.add_argument("--out", help="report path (default: output.path from the config, else stdout)")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        cfg = RunConfig.load(args.config, task=args.task, overrides=args.overrides)
        out = args.out or cfg.data["output"]["path"]
        if out is not None and not Path(out).resolve().parent.is_dir():
            raise ConfigError(f"output directory for {out} does not exist")
        log.info("running %s on %s", cfg.task, cfg.sig.label())
        report = run(cfg, exact=args.exact)
    except DimensionCapError as exc:
        print(f"openspin: {exc}", file=sys.stderr)
        return EXIT_DIMENSION
    except ValueError as exc:  # ConfigError, GradingError, BoundaryError
        print(f"openspin: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for path in write_outputs(report, out):
        log.info("wrote %s", path)
    for check in report.checks:
        if not check.passed:
            print(f"openspin: check failed: {check.name}", file=sys.stderr)
    return report.exit_code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
