#!/usr/bin/env python
"""scenepick command line: the pipeline subcommands plus Django's own administrative commands."""
import os
import sys


def main(argv=None):
    """Run a scenepick subcommand, or an administrative task."""
    argv = sys.argv[1:] if argv is None else list(argv)
    os.environ.setdefault("DJANGO_SETTINGS_MODULE", "scenepick_project.settings")
    try:
        import django
        from django.core.management import execute_from_command_line, get_commands
    except ImportError as exc:
        raise ImportError(
            "Couldn't import Django. Are you sure it's installed and "
            "available on your PYTHONPATH environment variable? Did you "
            "forget to activate a virtual environment?"
        ) from exc

    django.setup()
    from cli.runner import SUBCOMMANDS, run

    administrative = argv and argv[0] not in SUBCOMMANDS and (argv[0] in get_commands() or argv[0].startswith("-"))
    if administrative:
        execute_from_command_line([sys.argv[0]] + argv)
        return 0
    return run(argv)


if __name__ == "__main__":
    sys.exit(main())
