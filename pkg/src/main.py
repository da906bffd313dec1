"""
Command-line interface of the vakonomic integrator experiments.

Subcommands: flow, bvp, oracle, energy, convergence, check. Every
``ExperimentConfig`` field is available as ``--<field> VALUE`` (vectors as
comma separated numbers); values from ``--config FILE`` and from the file
named by ``VAKON_SETTINGS`` are overridden by explicit flags.

Exit codes:
    0  success
    1  bad configuration
    2  solver or check failure
"""

import argparse
import logging
import sys
from typing import Any, Dict, List, Optional

from dotenv import load_dotenv
from pydantic import ValidationError

from src.repositories.trajectories import format_value
from src.schemas.experiment import ExperimentConfig
from src.services.experiments import RUNNERS
from src.utils.config import load_config
from src.utils.exceptions import ConfigError, VakonomicError
from src.utils.logger import setup_logging

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_SOLVER = 2

MODE_HELP = {
    "flow": "run the second-order discrete flow from a seed",
    "bvp": "solve the boundary problem by shooting",
    "oracle": "solve the boundary problem by direct transcription",
    "energy": "energy study along a cart-pole flow",
    "convergence": "refinement study against a continuous reference",
    "check": "derivative gates and model identities",
}


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    """One flag per ``ExperimentConfig`` field; unset flags stay None."""
    group = parser.add_argument_group("experiment settings")
    for name, info in ExperimentConfig.model_fields.items():
        flags = [f"--{name}"]
        if "_" in name:
            flags.append(f"--{name.replace('_', '-')}")
        if info.annotation is bool:
            group.add_argument(*flags, dest=name, action=argparse.BooleanOptionalAction,
                               default=None, help=info.description)
        else:
            group.add_argument(*flags, dest=name, default=None, metavar="VALUE", help=info.description)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False, allow_abbrev=False)
    common.add_argument("--config", default=None, help="key=value settings file")
    common.add_argument("--log-level", default=None,
                        choices=["DEBUG", "INFO", "WARNING", "ERROR"], type=str.upper)

    parser = argparse.ArgumentParser(
        prog="vakonomic",
        description="Discrete vakonomic integrators and the cart-pole benchmark.",
        allow_abbrev=False,
    )
    sub = parser.add_subparsers(dest="mode", required=True)
    for mode, text in MODE_HELP.items():
        sp = sub.add_parser(mode, help=text, parents=[common], allow_abbrev=False)
        _add_config_flags(sp)
    return parser


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    return {name: getattr(args, name) for name in ExperimentConfig.model_fields}


def main(argv: Optional[List[str]] = None) -> int:
    """Parse arguments, run one experiment and print its summary."""
    load_dotenv()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if not exc.code else EXIT_CONFIG

    setup_logging(args.log_level)
    try:
        config = load_config(_overrides(args), args.config)
        result = RUNNERS[args.mode](config)
    except (ConfigError, ValidationError) as exc:
        logger.error(f"configuration error: {exc}")
        return EXIT_CONFIG
    except VakonomicError as exc:
        logger.error(f"{args.mode} failed: {type(exc).__name__}: {exc}")
        return EXIT_SOLVER

    for key, value in result.summary.items():
        print(f"{key}: {format_value(value)}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
