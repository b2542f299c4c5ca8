from apps.reports import pipeline
from apps.reports.base import BrushmarkCommand


class Command(BrushmarkCommand):
    help = 'Leave-one-painting-out cross-validation of the LBP + random forest baseline'
    name = 'baseline'
    config_keys = ('SEED', 'PATCH_SIZE', 'STRIDE', 'N_TREES', 'MAX_DEPTH', 'MIN_LEAF')
    input_options = ('manifest',)

    def add_run_arguments(self, parser):
        parser.add_argument('--manifest', required=True, help='Dataset manifest (JSON Lines)')
        parser.add_argument('--n-trees', type=int, help='Trees in the forest (default: 100)')
        parser.add_argument('--max-depth', type=int, help='Maximum tree depth (default: 16)')
        parser.add_argument('--min-leaf', type=int, help='Minimum samples per leaf (default: 5)')
        self.add_grid_arguments(parser)

    def run(self, run_config, options):
        out = self.output_dir(options)
        data = pipeline.baseline(run_config, options['manifest'], out)
        return f"Baseline mean patch accuracy {data['summary']['mean_accuracy']:.4f}; report in {out}"
