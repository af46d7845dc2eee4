"""
Single entry point for the scenepick subcommands: run(argv) dispatches to
the management command of the same name and returns the process exit code.
"""

import sys
from typing import Optional, Sequence, TextIO

from django.core.management import load_command_class
from django.core.management.base import CommandError

from .base import USAGE_ERROR

SUBCOMMANDS = ("segment", "fuse-score", "select", "reward", "validate", "stats", "annotate", "simulate")
PROG = "scenepick"


def usage() -> str:
    return f"usage: {PROG} {{{','.join(SUBCOMMANDS)}}} [options]\n"


def run(argv: Sequence[str], stdout: Optional[TextIO] = None, stderr: Optional[TextIO] = None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    argv = list(argv)

    if not argv or argv[0] not in SUBCOMMANDS:
        if argv:
            stderr.write(f"{PROG}: error: unknown subcommand {argv[0]!r}\n")
        stderr.write(usage())
        return USAGE_ERROR

    subcommand = argv[0]
    command = load_command_class("cli", subcommand.replace("-", "_"))
    parser = command.create_parser(PROG, subcommand)
    try:
        options = vars(parser.parse_args(argv[1:]))
    except CommandError as exc:
        # the parser raises instead of exiting when not driven by run_from_argv
        stderr.write(f"{PROG} {subcommand}: {exc}\n")
        return USAGE_ERROR
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else USAGE_ERROR

    args = options.pop("args", ())
    try:
        command.execute(*args, stdout=stdout, stderr=stderr, **options)
    except CommandError as exc:
        stderr.write(f"{PROG} {subcommand}: error: {exc}\n")
        return exc.returncode
    return 0
