"""Scripting entry point around the ``run`` and ``suite`` management commands."""

import os
import sys

import django
from django.apps import apps
from django.core.management import call_command
from django.core.management.base import CommandError

COMMANDS = ("run", "suite")
USAGE = (
    "usage: cli run <scenario> [--csv out.csv] [--seed N] [--report json] "
    "[--save] [--dump-clouds DIR]\n"
    "       cli suite [--csv-dir DIR] [--seed N]"
)


def cli(argv=None) -> int:
    """Returns 0 when the run(s) met every expectation, non-zero otherwise"""
    argv = list(sys.argv[1:] if argv is None else argv)
    if not argv or argv[0] not in COMMANDS:
        sys.stderr.write(USAGE + "\n")
        return 2

    if not apps.ready:
        os.environ.setdefault("DJANGO_SETTINGS_MODULE", "config.settings.development")
        django.setup()

    try:
        call_command(*argv)
    except CommandError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(cli())
