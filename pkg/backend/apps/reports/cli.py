"""
Single entry point for the eight Brushmark subcommands.

    python -m apps.reports.cli crossval --manifest corpus/manifest.jsonl --model-scale tiny

is equivalent to `python manage.py crossval ...`.
"""

import os
import sys

SUBCOMMANDS = ('synth', 'extract', 'train', 'crossval', 'baseline', 'entropy', 'report', 'vote')

USAGE = (
    'usage: brushmark <subcommand> [options]\n'
    f'subcommands: {", ".join(SUBCOMMANDS)}\n'
    "run 'brushmark <subcommand> --help' for the subcommand's options\n"
)


def _setup_django():
    os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'config.settings')
    from django.apps import apps
    if not apps.ready:
        import django
        django.setup()


def cli(argv=None):
    """Run one subcommand and return its exit status (2 for usage errors)."""
    argv = list(sys.argv[1:] if argv is None else argv)
    if not argv or argv[0] not in SUBCOMMANDS:
        if argv and argv[0] not in ('-h', '--help'):
            sys.stderr.write(f'brushmark: unknown subcommand {argv[0]!r}\n')
        sys.stderr.write(USAGE)
        return 2

    _setup_django()
    from django.core.management import load_command_class

    name, args = argv[0], argv[1:]
    command = load_command_class('apps.reports', name)
    try:
        command.run_from_argv(['brushmark', name, *args])
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 1
    return 0


if __name__ == '__main__':
    sys.exit(cli())
