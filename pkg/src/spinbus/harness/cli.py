"""Command-line entry point.

Exit codes: 0 success, 1 invalid configuration, 2 runtime failure,
3 some sweep points failed (their rows carry the failure status).
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from ..errors import ConfigError
from .config import KINDS, load_config
from .integrity import integrity_checks
from .plotting import plot
from .runner import run
from .table import export_csv

log = logging.getLogger("spinbus")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_PARTIAL = 0, 1, 2, 3


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="spinbus", description="Spin-mechanics simulation sweeps.")
    sub = p.add_subparsers(dest="command", required=True)
    for kind in KINDS + ("check",):
        sp = sub.add_parser(kind, help="run integrity checks" if kind == "check" else f"run a {kind} experiment")
        sp.add_argument("--config", required=True, type=Path)
        sp.add_argument("--out", type=Path, default=None, help="output directory (overrides the config)")
        sp.add_argument("--workers", type=int, default=None)
        sp.add_argument("--plot", action="store_true", help="also write an SVG figure")
        sp.add_argument("-v", "--verbose", action="store_true")
    return p


def _writable(directory: Path) -> bool:
    try:
        directory.mkdir(parents=True, exist_ok=True)
    except OSError:
        return False
    return directory.is_dir() and os.access(directory, os.W_OK)


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    kind = None if args.command == "check" else args.command
    try:
        cfg = load_config(args.config, kind=kind, out=args.out, workers=args.workers)
    except ConfigError as exc:
        for v in exc.violations:
            print(f"config error: {v}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(cfg.out)
    if args.command == "check":
        try:
            checks = integrity_checks(cfg)
        except Exception as exc:  # noqa: BLE001 - report and map to an exit code
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_RUNTIME
        for c in checks:
            print(c.line())
        return EXIT_OK if all(c.passed for c in checks) else EXIT_RUNTIME
    if not _writable(out):
        print(f"config error: output directory {out} is not writable", file=sys.stderr)
        return EXIT_CONFIG
    try:
        log.info("running %s (%s)", cfg.kind, cfg.fingerprint[:12])
        table = run(cfg)
        csv_path = export_csv(table, out / f"{cfg.kind}.csv")
        print(csv_path)
        if args.plot:
            print(plot(table, cfg.kind, out / f"{cfg.kind}.svg"))
    except Exception as exc:  # noqa: BLE001
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    failed = table.failed()
    if failed:
        print(f"{failed} of {len(table)} points failed", file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
