#!/usr/bin/env python
"""
Test runner for the vakonomic integrator package.

Wraps pytest with shortcuts for the two suites, the slow cart-pole scenarios
and coverage. Log files go to a temporary directory and a developer's
``VAKON_SETTINGS`` file is ignored, so runs are reproducible.

Usage examples:
    python scripts/run_tests.py                         # everything
    python scripts/run_tests.py --unit --fast           # unit tests without slow scenarios
    python scripts/run_tests.py --integration -c        # integration tests with coverage
    python scripts/run_tests.py tests/unit/test_vak2.py -v
"""

import argparse
import os
import subprocess
import sys
import tempfile
from pathlib import Path
from typing import List, Optional

from dotenv import load_dotenv

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT))

from src.utils.logger import get_logger  # noqa: E402

logger = get_logger("test_runner")

SUITES = {"unit": "tests/unit/", "integration": "tests/integration/"}
COVERAGE_FLAGS = ["--cov=src", "--cov-report=term", "--cov-report=html", "--cov-report=xml"]


def prepare_environment() -> None:
    load_dotenv()
    os.environ["TESTING"] = "true"
    os.environ.setdefault("LOG_DIR", os.path.join(tempfile.gettempdir(), "vakonomic-test-logs"))
    os.environ.pop("VAKON_SETTINGS", None)


def marker_expression(markers: Optional[str], fast: bool) -> Optional[str]:
    """Combine a user marker expression with the slow-test filter."""
    if not fast:
        return markers
    return f"({markers}) and not slow" if markers else "not slow"


def build_command(args: argparse.Namespace) -> List[str]:
    cmd = ["pytest"]
    if args.xvs:
        cmd.append("-vvs")
    elif args.verbose:
        cmd.append("-v")
    if args.coverage:
        cmd.extend(COVERAGE_FLAGS)
    markers = marker_expression(args.markers, args.fast)
    if markers:
        cmd.extend(["-m", markers])

    suite = next((path for name, path in SUITES.items() if getattr(args, name)), None)
    cmd.append(args.test_path or suite or "tests/")
    return cmd


def parse_args(argv: Optional[List[str]] = None) -> argparse.Namespace:
    parser = argparse.ArgumentParser(
        description="Run the vakonomic integrator tests.",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=__doc__.split("Usage examples:")[1],
    )
    parser.add_argument("test_path", nargs="?", help="test file or directory")
    suite = parser.add_mutually_exclusive_group()
    suite.add_argument("--unit", action="store_true", help="only tests/unit")
    suite.add_argument("--integration", action="store_true", help="only tests/integration")
    parser.add_argument("--fast", action="store_true", help="skip tests marked slow")
    parser.add_argument("-m", "--markers", help="pytest marker expression")
    parser.add_argument("-v", "--verbose", action="store_true")
    parser.add_argument("--xvs", action="store_true", help="extra verbose, no output capture")
    parser.add_argument("-c", "--coverage", action="store_true", help="coverage reports for src/")
    return parser.parse_args(argv)


def main(argv: Optional[List[str]] = None) -> int:
    args = parse_args(argv)
    prepare_environment()
    cmd = build_command(args)
    logger.info(f"Running: {' '.join(cmd)}")
    return subprocess.call(cmd, cwd=ROOT)


if __name__ == "__main__":
    sys.exit(main())
