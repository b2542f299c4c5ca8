"""
Shared base for the Brushmark management commands.

Handles the common flags, RunConfig resolution, the run trail and the
translation of domain errors into CommandError (exit code 1). argparse
usage errors keep Django's exit code 2.
"""

import logging
from pathlib import Path

from django.conf import settings
from django.core.exceptions import ValidationError
from django.core.management.base import BaseCommand, CommandError

from apps.audit.utils import log_run_completed, log_run_failed, log_run_started
from apps.core.exceptions import BrushmarkError
from apps.network.config import MODEL_SCALES
from apps.reports.run_config import resolve_run_config

logger = logging.getLogger(__name__)


def _csv_floats(value):
    return [float(part) for part in value.split(',') if part.strip()]


class BrushmarkCommand(BaseCommand):
    """
    Subclasses set `name`, `config_keys`, `input_options` (path flags echoed
    into the run config) and implement `run(run_config, options)`,
    which returns a short completion message.
    """
    name = None
    config_keys = ('SEED',)
    input_options = ()

    def add_arguments(self, parser):
        parser.add_argument('--config', help='Flat KEY=value config file (flags override it)')
        parser.add_argument('--out', help='Output directory (default: $BRUSHMARK_OUTPUT_DIR/<command>)')
        parser.add_argument('--seed', type=int, help='Base seed')
        self.add_run_arguments(parser)

    def add_run_arguments(self, parser):
        pass

    @staticmethod
    def add_grid_arguments(parser):
        parser.add_argument('--patch-size', type=int, help='Patch side length in pixels (default: 300)')
        parser.add_argument('--stride', type=int, help='Grid stride in pixels (default: 150)')

    @staticmethod
    def add_training_arguments(parser):
        parser.add_argument('--epochs', type=int, help='Training epochs (default: 100)')
        parser.add_argument('--lr', type=float, help='SGD learning rate (default: 1e-4)')
        parser.add_argument('--momentum', type=float, help='SGD momentum (default: 0.9)')
        parser.add_argument('--batch-size', type=int, help='Mini-batch size (default: 64)')
        parser.add_argument('--alphas', type=_csv_floats, help='Class-weight exponents, e.g. 0.01,1.0,0.75')
        parser.add_argument('--model-scale', choices=MODEL_SCALES, help='Network preset (default: paper; full is an alias)')
        parser.add_argument('--eval-every', type=int, help='Evaluate the held-out painting every N epochs')
        parser.add_argument('--augment', dest='augment', action='store_true', default=None,
                            help='Apply training augmentations (default)')
        parser.add_argument('--no-augment', dest='augment', action='store_false',
                            help='Disable training augmentations')

    def output_dir(self, options):
        out = Path(options.get('out') or Path(settings.BRUSHMARK_OUTPUT_DIR) / self.name)
        out.mkdir(parents=True, exist_ok=True)
        return out

    def run(self, run_config, options):
        raise NotImplementedError

    def handle(self, *args, **options):
        run_config = digest = seed = None
        out = options.get('out') or ''
        try:
            inputs = {name: options.get(name) for name in self.input_options}
            run_config = resolve_run_config(self.name, self.config_keys, options, options.get('config'), inputs)
            digest, seed = run_config.digest, run_config.seed
            out = self.output_dir(options)
            log_run_started(self.name, digest, seed, out)
            message = self.run(run_config, options)
        except (BrushmarkError, ValidationError, OSError) as exc:
            logger.error('%s failed: %s', self.name, exc)
            log_run_failed(self.name, exc, digest or '', seed, out)
            raise CommandError(f'{self.name}: {exc}', returncode=1) from exc

        log_run_completed(self.name, digest, seed, out, message or '')
        self.stdout.write(self.style.SUCCESS(message or f'{self.name} completed'))
