from apps.reports import pipeline
from apps.reports.base import BrushmarkCommand


class Command(BrushmarkCommand):
    help = 'Painting-level majority-vote verdicts from a posteriors file'
    name = 'vote'
    input_options = ('posteriors',)

    def add_run_arguments(self, parser):
        parser.add_argument('--posteriors', required=True, help='Posteriors file (JSON Lines)')

    def run(self, run_config, options):
        data = pipeline.vote(run_config, options['posteriors'], self.output_dir(options))
        for painting_id, verdict in data['paintings'].items():
            self.stdout.write(f"{painting_id}: {verdict['verdict']} ({verdict['author']})")
        return f"{data['correct']}/{data['total']} pure paintings attributed correctly"
