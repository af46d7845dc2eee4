import argparse
import logging
from pathlib import Path
from typing import Any, Optional, Sequence, Tuple

from django.core.management.base import BaseCommand, CommandError

from engine.errors import ScenePickError

from .config import LOG_LEVELS, OUTPUT_FORMATS, ConfigError, GlobalConfig
from .output import format_json, format_table

logger = logging.getLogger(__name__)

DOMAIN_ERROR = 1
USAGE_ERROR = 2


def positive_int(value: str) -> int:
    try:
        number = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value!r}")
    if number < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {number}")
    return number


def non_negative_int(value: str) -> int:
    try:
        number = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {value!r}")
    if number < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {number}")
    return number


def int_list(value: str) -> Tuple[int, ...]:
    try:
        numbers = tuple(int(part) for part in value.split(",") if part.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {value!r}")
    if not numbers or min(numbers) < 1:
        raise argparse.ArgumentTypeError(f"expected positive integers, got {value!r}")
    return numbers


class ScenePickCommand(BaseCommand):
    """
    Shared plumbing for the scenepick subcommands.

    Subclasses add their flags in add_command_arguments and return a JSON
    payload (or ready-made text) from run(). Domain errors leave with exit
    code 1, configuration problems with 2. Data goes to stdout or --out;
    diagnostics go to the log stream on stderr.
    """

    requires_system_checks = []
    # commands that own --out for something else switch this off
    result_file = True

    def add_arguments(self, parser):
        parser.add_argument("--config", help="TOML or JSON file whose keys mirror the flags")
        parser.add_argument("--log-level", dest="log_level", type=str.upper, choices=LOG_LEVELS)
        parser.add_argument("--format", dest="format", choices=OUTPUT_FORMATS)
        if self.result_file:
            parser.add_argument("--out", help="Write the result here instead of stdout")
        self.add_command_arguments(parser)

    def add_command_arguments(self, parser):
        pass

    def run(self, **options) -> Any:
        raise NotImplementedError("subclasses of ScenePickCommand must provide a run() method")

    def table(self, payload) -> Optional[Tuple[Sequence[str], Sequence[Sequence[Any]]]]:
        """Headers and rows for --format table; None keeps JSON output."""
        return None

    def handle(self, *args, **options):
        try:
            self.config = GlobalConfig.load(options.get("config"), options)
        except ConfigError as exc:
            raise CommandError(str(exc), returncode=USAGE_ERROR) from exc

        if self.config["log_level"]:
            logging.getLogger().setLevel(self.config["log_level"])

        try:
            payload = self.run(*args, **options)
        except CommandError:
            raise
        except (ScenePickError, OSError, ValueError) as exc:
            logger.debug(f"{type(exc).__name__} in {self.__module__}", exc_info=True)
            raise CommandError(str(exc), returncode=DOMAIN_ERROR) from exc

        if payload is not None:
            self.emit(payload, options.get("out"))

    def render(self, payload) -> str:
        if isinstance(payload, str):
            return payload
        if self.config["format"] == "table":
            table = self.table(payload)
            if table is not None:
                return format_table(*table)
        return format_json(payload)

    def emit(self, payload, out: Optional[str] = None):
        text = self.render(payload)
        if out:
            path = Path(out)
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(text if text.endswith("\n") else text + "\n", encoding="utf-8")
            logger.info(f"Wrote {path}")
        else:
            self.stdout.write(text)
