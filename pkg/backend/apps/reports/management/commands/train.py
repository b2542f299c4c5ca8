from apps.reports import pipeline
from apps.reports.base import BrushmarkCommand

TRAIN_KEYS = (
    'SEED', 'PATCH_SIZE', 'STRIDE', 'EPOCHS', 'LR', 'MOMENTUM', 'BATCH_SIZE', 'ALPHAS', 'MODEL_SCALE',
    'AUGMENT', 'EVAL_EVERY',
)


class Command(BrushmarkCommand):
    help = 'Train and evaluate a single leave-one-painting-out fold'
    name = 'train'
    config_keys = TRAIN_KEYS
    input_options = ('manifest',)

    def add_run_arguments(self, parser):
        parser.add_argument('--manifest', required=True, help='Dataset manifest (JSON Lines)')
        parser.add_argument('--heldout', required=True, help='Painting id held out for evaluation')
        self.add_grid_arguments(parser)
        self.add_training_arguments(parser)

    def run(self, run_config, options):
        result = pipeline.train(run_config, options['manifest'], options['heldout'], self.output_dir(options))
        return (
            f'Fold {result.held_out_painting}: accuracy {result.patch_accuracy:.4f} '
            f'at epoch {result.best_epoch}, vote {result.painting_vote.value}'
        )
