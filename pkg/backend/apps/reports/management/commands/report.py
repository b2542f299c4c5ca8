from apps.reports import pipeline
from apps.reports.base import BrushmarkCommand


class Command(BrushmarkCommand):
    help = 'Render class and entropy heatmaps and a summary from a posteriors file'
    name = 'report'
    config_keys = ('SEED', 'TAU')
    input_options = ('posteriors', 'manifest')

    def add_run_arguments(self, parser):
        parser.add_argument('--posteriors', required=True, help='Posteriors file (JSON Lines)')
        parser.add_argument('--manifest', help='Manifest whose images give the heatmap dimensions')
        parser.add_argument('--tau', type=float, help='Painted-mass gate (default: 0.2)')

    def run(self, run_config, options):
        out = pipeline.report(run_config, options['posteriors'], self.output_dir(options), options.get('manifest'))
        return f'Heatmaps and summary written to {out}'
