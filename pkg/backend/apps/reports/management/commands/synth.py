from apps.reports import pipeline
from apps.reports.base import BrushmarkCommand


class Command(BrushmarkCommand):
    help = 'Generate a synthetic corpus of human-style, robot-style and hybrid paintings'
    name = 'synth'
    config_keys = ('SEED', 'N_HUMAN', 'N_ROBOT', 'N_HYBRID', 'SIZE', 'PATCH_SIZE', 'MIX')

    def add_run_arguments(self, parser):
        parser.add_argument('--n-human', type=int, help='Pure human-style paintings (default: 6)')
        parser.add_argument('--n-robot', type=int, help='Pure robot-style paintings (default: 6)')
        parser.add_argument('--n-hybrid', type=int, help='Hybrid paintings (default: 3)')
        parser.add_argument('--size', type=int, help='Canvas side length in pixels (default: 900)')
        parser.add_argument('--patch-size', type=int, help='Annotation window and minimum canvas size (default: 300)')
        parser.add_argument('--mix', type=float, help='Hybrid territory split between the two styles (default: 0.5)')
        parser.add_argument('--jobs', type=int, default=None, help='Parallel painting generation')

    def run(self, run_config, options):
        n_jobs = options.get('jobs') or 1
        result = pipeline.synth(run_config, self.output_dir(options), n_jobs=n_jobs)
        return f'Wrote {len(result.entries)} paintings to {result.manifest_path}'
