from pathlib import Path

from apps.reports import pipeline
from apps.reports.base import BrushmarkCommand


class Command(BrushmarkCommand):
    help = 'Tile every painting of a manifest into a binary patch cache'
    name = 'extract'
    config_keys = ('SEED', 'PATCH_SIZE', 'STRIDE')
    input_options = ('manifest',)

    def add_run_arguments(self, parser):
        parser.add_argument('--manifest', required=True, help='Dataset manifest (JSON Lines)')
        parser.add_argument('--cache-name', default='patches.bmpc', help='Cache file name inside --out')
        self.add_grid_arguments(parser)

    def run(self, run_config, options):
        path = Path(self.output_dir(options)) / options['cache_name']
        count = pipeline.extract(run_config, options['manifest'], path)
        return f'Wrote {count} patches to {path}'
