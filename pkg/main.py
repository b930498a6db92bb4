"""
The main entry point for the project.
"""

import argparse
import logging
import sys
from typing import NoReturn

from src.commands import (
    cmd_ablate,
    cmd_curate,
    cmd_eval,
    cmd_inspect,
    cmd_synthetic,
    cmd_train,
)
from src.config import Config
from src.structures.enums import ExecutionMode
from src.structures.errors import (
    ArtifactIOError,
    PromptError,
    ValidationError,
)
from src.utilities import configure_logging, parse_override, validate_directory

PATH_FLAGS = (
    "vocab",
    "weights",
    "dataset",
    "features",
    "checkpoint",
    "classes",
    "fixtures",
)
LIST_FLAGS = ("features",)

logger = logging.getLogger("src")


class CommandLineParser(argparse.ArgumentParser):
    """An argument parser whose usage errors exit as validation errors."""

    def error(self, message: str) -> NoReturn:
        """Prints the usage and exits with the validation exit code."""
        self.print_usage(sys.stderr)
        self.exit(
            ValidationError.exit_code, f"{self.prog}: error: {message}\n"
        )


def parse_arguments(argv: list[str] | None = None) -> argparse.Namespace:
    """Parses the command line arguments."""
    parser = CommandLineParser(
        description="Text-only prompt learning for a frozen text encoder"
    )
    parser.add_argument(
        "mode",
        choices=ExecutionMode.labels(),
        help="The subcommand to run.",
    )
    parser.add_argument(
        "--config",
        default=None,
        help="A JSON config file layered over the defaults.",
    )
    parser.add_argument(
        "--config-dir",
        default=None,
        type=validate_directory,
        help="The location of the default config directory.",
    )
    parser.add_argument("--seed", type=int, help="The root random seed.")
    parser.add_argument("--out", help="The directory holding run folders.")
    parser.add_argument("--run-id", help="The name of the run folder.")
    parser.add_argument("--log-level", help="The logging level.")
    for name in PATH_FLAGS:
        if name in LIST_FLAGS:
            parser.add_argument(
                f"--{name}",
                action="append",
                help=f"A {name} path; repeat it to score several sets.",
            )
        else:
            parser.add_argument(f"--{name}", help=f"The {name} path.")
    parser.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        type=parse_override,
        metavar="KEY=VALUE",
        help="Overrides a config value, e.g. train.lr=0.01.",
    )
    args = parser.parse_args(argv)
    args.mode = ExecutionMode.parse(args.mode)
    return args


def build_config(args: argparse.Namespace) -> Config:
    """Layers the command line flags over the config files."""
    overrides = list(args.overrides)
    if args.seed is not None:
        overrides.append((["seed"], args.seed))
    if args.out is not None:
        overrides.append((["paths", "output"], args.out))
    if args.run_id is not None:
        overrides.append((["run_id"], args.run_id))
    if args.log_level is not None:
        overrides.append((["log_level"], args.log_level))
    for name in PATH_FLAGS:
        if (value := getattr(args, name)) is not None:
            if isinstance(value, list) and len(value) == 1:
                value = value[0]
            overrides.append((["paths", name], value))
    return Config(
        config_file=args.config,
        overrides=overrides,
        config_directory=args.config_dir,
    )


def run(args: argparse.Namespace) -> int:
    """Runs one subcommand and returns the process exit code."""
    try:
        config = build_config(args)
        configure_logging(config.get("log_level", default="INFO"))

        # Execute the selected subcommand
        match args.mode:
            case ExecutionMode.CURATE:
                directory = cmd_curate(config)
            case ExecutionMode.TRAIN:
                directory = cmd_train(config)
            case ExecutionMode.EVAL:
                directory = cmd_eval(config)
            case ExecutionMode.ABLATE:
                directory = cmd_ablate(config)
            case ExecutionMode.INSPECT:
                directory = cmd_inspect(config)
            case ExecutionMode.SYNTHETIC:
                directory = cmd_synthetic(config)
    except PromptError as error:
        logger.error("%s: %s", type(error).__name__, error)
        return error.exit_code
    except OSError as error:
        logger.error("I/O failure: %s", error)
        return ArtifactIOError.exit_code
    logger.info("Done; artifacts are in %s.", directory)
    return 0


def main() -> None:
    """The main function."""
    configure_logging()
    sys.exit(run(parse_arguments()))


if __name__ == "__main__":
    main()
