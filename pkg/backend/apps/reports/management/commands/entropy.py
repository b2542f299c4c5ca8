from apps.reports import pipeline
from apps.reports.base import BrushmarkCommand


class Command(BrushmarkCommand):
    help = 'Conditional entropy statistics and Mann-Whitney tests from a posteriors file'
    name = 'entropy'
    config_keys = ('SEED', 'TAU', 'BALANCED')
    input_options = ('posteriors', 'annotations')

    def add_run_arguments(self, parser):
        parser.add_argument('--posteriors', required=True, help='Posteriors file (JSON Lines)')
        parser.add_argument('--annotations', help='Hybrid annotation regions (JSON Lines)')
        parser.add_argument('--tau', type=float, help='Painted-mass gate (default: 0.2)')
        parser.add_argument('--balanced', action='store_true', default=None,
                            help='Sample as many pure paintings per author as there are hybrids')

    def run(self, run_config, options):
        out = self.output_dir(options)
        data = pipeline.entropy(run_config, options['posteriors'], out, options.get('annotations'))
        return f"Entropy over {len(data['records'])} patches written to {out / pipeline.ENTROPY_NAME}"
