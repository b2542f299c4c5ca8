from apps.reports import pipeline
from apps.reports.base import BrushmarkCommand
from apps.reports.management.commands.train import TRAIN_KEYS


class Command(BrushmarkCommand):
    help = 'Leave-one-painting-out cross-validation of the CNN'
    name = 'crossval'
    config_keys = (*TRAIN_KEYS, 'SINGLE_PATCH_SEEDS')
    input_options = ('manifest',)

    def add_run_arguments(self, parser):
        parser.add_argument('--manifest', required=True, help='Dataset manifest (JSON Lines)')
        parser.add_argument('--single-patch-seeds', type=int,
                            help='Also run the single-patch regime over this many seeds (default: 0)')
        self.add_grid_arguments(parser)
        self.add_training_arguments(parser)

    def run(self, run_config, options):
        out = self.output_dir(options)
        data = pipeline.crossval(run_config, options['manifest'], out)
        summary = data['summary']
        return (
            f"Mean patch accuracy {summary['mean_accuracy']:.4f} over {summary['n_folds']} folds, "
            f"{summary['vote_correct']}/{summary['vote_total']} paintings by vote; report in {out}"
        )
