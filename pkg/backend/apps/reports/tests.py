"""
Tests for the Reports App

Run tests with: python manage.py test apps.reports
(the end-to-end runs are tagged slow: --exclude-tag slow skips them)
"""

import io
import json
import tempfile
import zipfile
from datetime import datetime
from pathlib import Path
from types import SimpleNamespace
from unittest.mock import patch

import numpy as np
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase, TestCase, override_settings, tag
from openpyxl import load_workbook
from PIL import Image

from apps.audit.models import RunTrail
from apps.core.exceptions import ConfigurationError, UsageError
from apps.evaluation.crossval import build_report, fold_result_from_posteriors, report_to_dict
from apps.evaluation.posteriors import write_posteriors
from apps.network.config import ModelConfig
from apps.patches.cache import read_patch_cache
from apps.patches.extraction import PatchRecord
from apps.patches.labels import Author, PatchLabel
from apps.patches.manifest import ManifestEntry
from apps.reports import excel, heatmaps, pipeline, writers
from apps.reports.cli import cli
from apps.reports.run_config import resolve_run_config

GRID = [(x, y) for y in (0, 50, 100) for x in (0, 50, 100)]
PATCH = 100


def painting_rows(painting_id, author, posterior, blank_patches=1):
    """3x3 grid of 100-pixel patches at stride 50; the last blank_patches are near-certain Blank."""
    rows = []
    for index, (x, y) in enumerate(GRID):
        p_blank, p_human, p_robot = (0.96, 0.02, 0.02) if index >= len(GRID) - blank_patches else posterior
        rows.append({
            'painting_id': painting_id, 'author': author, 'x': x, 'y': y, 'size': PATCH, 'label': None,
            'p_blank': p_blank, 'p_human': p_human, 'p_robot': p_robot,
        })
    return rows


def corpus_rows():
    """Six human, six robot and three hybrid paintings with mirrored pure posteriors."""
    rows = []
    for k in range(6):
        share = 0.80 + 0.02 * k
        rest = 0.95 - share
        rows += painting_rows(f'human_painting_{k + 1}', 'human', (0.05, share, rest))
        rows += painting_rows(f'robot_painting_{k + 1}', 'robot', (0.05, rest, share))
    for k in range(3):
        rows += painting_rows(f'hybrid_painting_{k + 1}', 'hybrid', (0.05, 0.46 + 0.01 * k, 0.49 - 0.01 * k))
    return rows


def sample_report():
    folds = []
    for index, (pid, author, label) in enumerate([('human_painting_1', Author.HUMAN, PatchLabel.HUMAN),
                                                  ('robot_painting_1', Author.ROBOT, PatchLabel.ROBOT)]):
        patches = [PatchRecord(pid, x, 0, 50, label) for x in (0, 50, 100)] + [PatchRecord(pid, 150, 0, 50, PatchLabel.BLANK)]
        posteriors = [(0.1, 0.8, 0.1) if label is PatchLabel.HUMAN else (0.1, 0.1, 0.8)] * 3 + [(0.1, 0.8, 0.1)]
        entry = ManifestEntry(Path(f'{pid}.png'), pid, author)
        folds.append(fold_result_from_posteriors(index, entry, patches, posteriors, best_epoch=3))
    return report_to_dict(build_report(folds, 'cnn'), {'command': 'crossval', 'SEED': 0})


class RunConfigTests(SimpleTestCase):
    """Tests for RunConfig resolution."""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)

    def config_file(self, text):
        path = Path(self.tmp.name) / 'run.env'
        path.write_text(text)
        return path

    @override_settings(BRUSHMARK_SEED=11)
    def test_defaults(self):
        """Unset keys fall back to the built-in defaults; the seed default comes from settings."""
        run_config = resolve_run_config('crossval', ('SEED', 'PATCH_SIZE', 'STRIDE', 'TAU'))
        self.assertEqual(dict(run_config.values), {'SEED': 11, 'PATCH_SIZE': 300, 'STRIDE': 150, 'TAU': 0.2})

    def test_flags_override_file(self):
        """File values override defaults and flags override file values."""
        path = self.config_file('EPOCHS=7\nLR=0.01\nALPHAS=0.5,1,1\n')
        run_config = resolve_run_config(
            'train', ('EPOCHS', 'LR', 'ALPHAS', 'BATCH_SIZE'), {'epochs': 3, 'lr': None}, path,
        )
        self.assertEqual(run_config['EPOCHS'], 3)
        self.assertEqual(run_config['LR'], 0.01)
        self.assertEqual(run_config['ALPHAS'], [0.5, 1.0, 1.0])
        self.assertEqual(run_config['BATCH_SIZE'], 64)

    def test_unknown_file_key(self):
        path = self.config_file('EPOCHZ=7\n')
        with self.assertRaises(ConfigurationError):
            resolve_run_config('train', ('EPOCHS',), config_path=path)

    def test_invalid_value(self):
        with self.assertRaises(ConfigurationError):
            resolve_run_config('train', ('EPOCHS',), {'epochs': 'many'})
        with self.assertRaises(ConfigurationError):
            resolve_run_config('train', ('MODEL_SCALE',), {'model_scale': 'huge'})

    def test_digest(self):
        """The digest depends on every resolved value and the command."""
        first = resolve_run_config('entropy', ('SEED', 'TAU'), {'seed': 1})
        self.assertEqual(first.digest, resolve_run_config('entropy', ('SEED', 'TAU'), {'seed': 1}).digest)
        self.assertNotEqual(first.digest, resolve_run_config('entropy', ('SEED', 'TAU'), {'seed': 2}).digest)
        self.assertNotEqual(first.digest, resolve_run_config('vote', ('SEED', 'TAU'), {'seed': 1}).digest)
        self.assertEqual(len(first.digest), 64)

    def test_model_scale_paper_and_alias(self):
        """'paper' selects the full-size network; 'full' is the same preset under another name."""
        paper = resolve_run_config('train', ('PATCH_SIZE', 'MODEL_SCALE'), {'model_scale': 'paper'})
        alias = resolve_run_config('train', ('PATCH_SIZE', 'MODEL_SCALE'), {'model_scale': 'full'})
        self.assertEqual(paper['MODEL_SCALE'], 'paper')
        self.assertEqual(alias['MODEL_SCALE'], 'paper')
        self.assertEqual(paper.digest, alias.digest)
        self.assertEqual(paper.model_config(), ModelConfig.full())
        self.assertEqual(resolve_run_config('train', ('MODEL_SCALE',))['MODEL_SCALE'], 'paper')

    def test_input_paths_echoed(self):
        """Given input paths appear in the echoed config; absent optional inputs are left out."""
        run_config = resolve_run_config(
            'entropy', ('SEED', 'TAU'), {'seed': 1},
            inputs={'posteriors': Path('runs/cv/posteriors.jsonl'), 'annotations': None},
        )
        self.assertEqual(dict(run_config.to_dict()['INPUTS']), {'posteriors': 'runs/cv/posteriors.jsonl'})
        bare = resolve_run_config('entropy', ('SEED', 'TAU'), {'seed': 1})
        self.assertNotIn('INPUTS', bare.to_dict())
        self.assertNotEqual(run_config.digest, bare.digest)

    def test_builds_configs(self):
        run_config = resolve_run_config(
            'crossval', ('SEED', 'PATCH_SIZE', 'EPOCHS', 'LR', 'MOMENTUM', 'BATCH_SIZE', 'ALPHAS', 'MODEL_SCALE',
                         'AUGMENT', 'EVAL_EVERY'),
            {'seed': 4, 'patch_size': 64, 'model_scale': 'tiny', 'augment': False},
        )
        model_cfg, train_cfg = run_config.model_config(), run_config.train_config()
        self.assertEqual(model_cfg.input_size, 64)
        self.assertEqual(model_cfg.block_channels, (8, 16, 32, 32))
        self.assertIsNone(train_cfg.augmentation)
        self.assertEqual(train_cfg.seed, 4)


class HeatmapTests(SimpleTestCase):
    """Tests for overlap-averaged heatmaps."""

    def test_uniform_value(self):
        field = heatmaps.render_heatmap((200, 200), [0.25] * len(GRID), (GRID, PATCH))
        self.assertEqual(field.shape, (200, 200))
        np.testing.assert_allclose(field, 0.25)
        colors = heatmaps.entropy_colors(field)
        self.assertEqual(len(np.unique(colors.reshape(-1, 3), axis=0)), 1)

    def test_center_patch_overlap_average(self):
        """600x600, 9 patches of 300 at stride 150: the 4 covering patches are averaged."""
        coords = [(x, y) for y in (0, 150, 300) for x in (0, 150, 300)]
        values = [0.2] * 9
        values[4] = 1.0
        field = heatmaps.render_heatmap((600, 600), values, (coords, 300))
        self.assertEqual(field.shape, (600, 600))
        np.testing.assert_allclose(field[150:300, 150:300], (3 * 0.2 + 1.0) / 4)
        np.testing.assert_allclose(field[0:150, 0:150], 0.2)

    def test_dimensions_from_image(self):
        """Pixels no patch covers have no value and are drawn grey."""
        class Painting:
            width, height = 230, 210
        field = heatmaps.render_heatmap(Painting(), [0.5] * len(GRID), (GRID, PATCH))
        self.assertEqual(field.shape, (210, 230))
        self.assertTrue(np.isnan(field[205, 225]))
        self.assertEqual(tuple(heatmaps.entropy_colors(field)[205, 225]), tuple(heatmaps.NO_DATA.astype(np.uint8)))

    def test_mismatch(self):
        with self.assertRaises(UsageError):
            heatmaps.render_heatmap((200, 200), [0.5] * 4, (GRID, PATCH))
        with self.assertRaises(UsageError):
            heatmaps.render_heatmap((150, 150), [0.5] * len(GRID), (GRID, PATCH))

    def test_excluded_values_skipped(self):
        values = [None] + [0.5] * (len(GRID) - 1)
        field = heatmaps.render_heatmap((200, 200), values, (GRID, PATCH))
        self.assertTrue(np.isnan(field[0:50, 0:50]).all())
        np.testing.assert_allclose(field[60:200, 60:200], 0.5)

    def test_class_colors(self):
        """A region predicted Human everywhere is blue; a Human/Robot split blends the two colors."""
        predictions = [PatchLabel.HUMAN] * len(GRID)
        rgb = heatmaps.class_colors(heatmaps.class_field((200, 200), predictions, (GRID, PATCH)))
        self.assertEqual(tuple(rgb[100, 100]), (33, 102, 172))

        coords = [(0, 0), (0, 0)]
        field = heatmaps.class_field((100, 100), [PatchLabel.HUMAN, PatchLabel.ROBOT], (coords, 100))
        self.assertEqual(tuple(heatmaps.class_colors(field)[50, 50]), (106, 63, 108))

    def test_hybrid_entropy_map_darker(self):
        """An entropy map of a hybrid maps to higher values (darker) than a pure painting's."""
        def mean_field(rows):
            from apps.entropy.conditional import conditional_entropy
            values = [conditional_entropy(row) for row in rows]
            return heatmaps.render_heatmap((200, 200), values, (GRID, PATCH))

        pure = mean_field(painting_rows('human_painting_1', 'human', (0.05, 0.9, 0.05)))
        hybrid = mean_field(painting_rows('hybrid_painting_1', 'hybrid', (0.05, 0.5, 0.45)))
        self.assertLess(np.nanmean(pure), np.nanmean(hybrid))
        self.assertGreater(heatmaps.entropy_colors(pure).mean(), heatmaps.entropy_colors(hybrid).mean())


class WriterTests(SimpleTestCase):
    """Tests for JSON, CSV and workbook writers."""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.out = Path(self.tmp.name)

    def test_json_keeps_order_and_bytes(self):
        data = {'b': 1, 'a': [0.5, None], 'c': {'z': 'x'}}
        first = writers.write_json(self.out / 'one.json', data).read_bytes()
        second = writers.write_json(self.out / 'two.json', data).read_bytes()
        self.assertEqual(first, second)
        self.assertEqual(list(json.loads(first)), ['b', 'a', 'c'])
        self.assertTrue(first.endswith(b'\n'))

    def test_confusion_csv(self):
        path = writers.write_confusion_csv(self.out / 'confusion.csv', [[1, 0, 0], [0, 5, 1], [0, 2, 7]])
        lines = path.read_text().splitlines()
        self.assertEqual(lines[0], 'true\\predicted,Blank,Human,Robot')
        self.assertEqual(lines[2], 'Human,0,5,1')

    def test_crossval_summary(self):
        text = writers.crossval_summary(sample_report())
        self.assertIn('Model family: cnn', text)
        self.assertIn('Majority vote: 2/2 paintings', text)
        self.assertIn('human_painting_1', text)

    def test_workbook(self):
        report = sample_report()
        path = excel.write_workbook(self.out / 'report.xlsx', report)
        wb = load_workbook(path)
        self.assertEqual(wb.sheetnames, ['Folds', 'Confusion', 'Summary'])
        folds = wb['Folds']
        self.assertEqual(folds.cell(row=1, column=2).value, 'Held-out painting')
        self.assertEqual(folds.cell(row=2, column=2).value, 'human_painting_1')
        self.assertTrue(folds.cell(row=1, column=1).font.bold)
        confusion = wb['Confusion']
        self.assertEqual([c.value for c in confusion[3]], ['Human', 0, 3, 0])

    def test_workbook_bytes_are_reproducible(self):
        """Two exports of one report are byte-identical; no save time leaks into the archive."""
        report = sample_report()
        first = excel.write_workbook(self.out / 'first.xlsx', report).read_bytes()
        second = excel.write_workbook(self.out / 'second.xlsx', report).read_bytes()
        self.assertEqual(first, second)

        with zipfile.ZipFile(io.BytesIO(first)) as archive:
            self.assertEqual({info.date_time for info in archive.infolist()}, {excel.ZIP_DATE_TIME})
            core = archive.read(excel.CORE_PROPERTIES).decode('utf-8')
        self.assertIn('2000-01-01T00:00:00Z', core)
        self.assertNotIn(str(datetime.now().year), core)
        self.assertEqual(load_workbook(self.out / 'first.xlsx').sheetnames, ['Folds', 'Confusion', 'Summary'])


class PipelineTests(SimpleTestCase):
    """Tests for the posterior-driven pipelines."""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.out = Path(self.tmp.name)
        self.posteriors = write_posteriors(self.out / 'posteriors.jsonl', corpus_rows())

    def run_config(self, command, **options):
        return resolve_run_config(command, ('SEED', 'TAU', 'BALANCED'), options)

    def test_entropy_elevated_for_hybrids(self):
        """Hybrid medians exceed the pure medians; pure human and pure robot are indistinguishable."""
        data = pipeline.entropy(self.run_config('entropy'), self.posteriors, self.out / 'entropy')
        categories = data['categories']
        self.assertGreater(categories['hybrid']['median'], categories['pure']['median'])
        self.assertLess(data['tests']['pure_vs_hybrid']['p_value'], 0.05)
        self.assertEqual(data['tests']['pure_vs_hybrid']['u'], 0)
        self.assertGreater(data['tests']['human_vs_robot']['p_value'], 0.1)
        self.assertEqual(categories['human']['n_patches'], 6 * 8)
        self.assertEqual(len(data['records']), 15 * 9)

    def test_entropy_balanced(self):
        data = pipeline.entropy(self.run_config('entropy', balanced=True), self.posteriors, self.out / 'entropy')
        self.assertEqual(len(data['categories']['human']['painting_medians']), 3)
        self.assertEqual(len(data['categories']['robot']['painting_medians']), 3)

    def test_votes(self):
        data = pipeline.vote(self.run_config('vote'), self.posteriors, self.out / 'vote')
        self.assertEqual((data['correct'], data['total']), (12, 12))
        self.assertEqual(data['paintings']['robot_painting_2']['verdict'], 'Robot')
        self.assertEqual(data['paintings']['human_painting_1']['n_blank'], 1)
        self.assertIsNone(data['paintings']['hybrid_painting_1']['correct'])

    def test_report_heatmaps(self):
        """One class and one entropy raster per painting, sized to the posterior grid."""
        out = pipeline.report(self.run_config('report'), self.posteriors, self.out / 'report')
        class_map = Image.open(out / 'heatmaps' / 'human_painting_1_class.png')
        self.assertEqual(class_map.size, (200, 200))
        self.assertTrue((out / 'heatmaps' / 'hybrid_painting_3_entropy.png').exists())
        summary = (out / pipeline.SUMMARY_NAME).read_text()
        self.assertIn('hybrid_painting_3', summary)

    def test_full_run_epochs(self):
        class Fold:
            def __init__(self, best_epoch):
                self.best_epoch = best_epoch

        class Report:
            folds = [Fold(3), Fold(4), Fold(8), Fold(None)]

        self.assertEqual(pipeline.full_run_epochs(Report(), 10), 4)
        Report.folds = [Fold(None)]
        self.assertEqual(pipeline.full_run_epochs(Report(), 10), 10)


@patch('apps.reports.base.log_run_completed')
@patch('apps.reports.base.log_run_failed')
@patch('apps.reports.base.log_run_started')
class CliTests(SimpleTestCase):
    """Tests for cli() exit statuses."""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.out = Path(self.tmp.name)

    def run_cli(self, argv):
        with patch('sys.stderr', new_callable=io.StringIO) as stderr, \
                patch('sys.stdout', new_callable=io.StringIO) as stdout:
            status = cli(argv)
        return status, stdout.getvalue(), stderr.getvalue()

    def test_no_arguments(self, *mocks):
        status, _, stderr = self.run_cli([])
        self.assertEqual(status, 2)
        self.assertIn('usage:', stderr)

    def test_unknown_subcommand(self, *mocks):
        status, _, stderr = self.run_cli(['paint'])
        self.assertEqual(status, 2)
        self.assertIn("unknown subcommand 'paint'", stderr)

    def test_unknown_flag(self, *mocks):
        status, _, _ = self.run_cli(['vote', '--posteriors', 'x.jsonl', '--bogus'])
        self.assertEqual(status, 2)

    def test_validation_failure(self, started, failed, completed):
        """A missing input file is a validation failure: exit 1 with a diagnostic line."""
        status, _, stderr = self.run_cli(['vote', '--posteriors', str(self.out / 'missing.jsonl'), '--out', str(self.out)])
        self.assertEqual(status, 1)
        self.assertIn('vote:', stderr)
        failed.assert_called_once()
        completed.assert_not_called()

    def test_success(self, started, failed, completed):
        posteriors = write_posteriors(self.out / 'posteriors.jsonl', corpus_rows())
        status, stdout, _ = self.run_cli(['vote', '--posteriors', str(posteriors), '--out', str(self.out / 'vote')])
        self.assertEqual(status, 0)
        self.assertIn('12/12 pure paintings', stdout)
        votes = json.loads((self.out / 'vote' / pipeline.VOTES_NAME).read_text())
        self.assertEqual(votes['run_config']['INPUTS'], {'posteriors': str(posteriors)})
        started.assert_called_once()
        completed.assert_called_once()

    def test_train_accepts_model_scale_paper(self, *mocks):
        result = SimpleNamespace(
            held_out_painting='human_painting_1', patch_accuracy=1.0, best_epoch=1,
            painting_vote=SimpleNamespace(value='Human'),
        )
        with patch('apps.reports.pipeline.train', return_value=result) as train:
            status, stdout, _ = self.run_cli([
                'train', '--manifest', 'corpus/manifest.jsonl', '--heldout', 'human_painting_1',
                '--model-scale', 'paper', '--out', str(self.out / 'train'),
            ])
        self.assertEqual(status, 0)
        self.assertIn('Fold human_painting_1', stdout)
        run_config = train.call_args.args[0]
        self.assertEqual(run_config['MODEL_SCALE'], 'paper')
        self.assertEqual(run_config.model_config(), ModelConfig.full())
        self.assertEqual(run_config.to_dict()['INPUTS'], {'manifest': 'corpus/manifest.jsonl'})

    def test_entropy_output_is_deterministic(self, *mocks):
        posteriors = write_posteriors(self.out / 'posteriors.jsonl', corpus_rows())
        outputs = []
        for run in ('a', 'b'):
            status, _, _ = self.run_cli([
                'entropy', '--posteriors', str(posteriors), '--tau', '0.2', '--out', str(self.out / run),
            ])
            self.assertEqual(status, 0)
            outputs.append((self.out / run / pipeline.ENTROPY_NAME).read_bytes())
        self.assertEqual(outputs[0], outputs[1])


class RunTrailCommandTests(TestCase):
    """Tests for the run trail written by management commands."""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.out = Path(self.tmp.name)

    def test_completed_run(self):
        posteriors = write_posteriors(self.out / 'posteriors.jsonl', corpus_rows())
        call_command('vote', posteriors=str(posteriors), out=str(self.out / 'vote'), stdout=io.StringIO())
        trail = list(RunTrail.objects.order_by('id'))
        self.assertEqual([entry.status for entry in trail], ['Started', 'Completed'])
        self.assertEqual(trail[0].command, 'vote')
        self.assertEqual(len(trail[0].config_digest), 64)

    def test_failed_run(self):
        with self.assertRaises(CommandError) as caught:
            call_command('entropy', posteriors=str(self.out / 'missing.jsonl'), out=str(self.out / 'e'))
        self.assertEqual(caught.exception.returncode, 1)
        self.assertEqual(RunTrail.objects.latest('id').status, 'Failed')

    def test_default_output_dir(self):
        with self.settings(BRUSHMARK_OUTPUT_DIR=str(self.out / 'runs')):
            posteriors = write_posteriors(self.out / 'posteriors.jsonl', corpus_rows())
            call_command('vote', posteriors=str(posteriors), stdout=io.StringIO())
        self.assertTrue((self.out / 'runs' / 'vote' / pipeline.VOTES_NAME).exists())


@tag('slow')
class EndToEndTests(TestCase):
    """Synthetic corpus through every subcommand with a tiny network."""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.out = Path(self.tmp.name)
        call_command(
            'synth', out=str(self.out / 'corpus'), n_human=2, n_robot=2, n_hybrid=1, size=192, patch_size=64,
            seed=5, stdout=io.StringIO(),
        )
        self.manifest = str(self.out / 'corpus' / 'manifest.jsonl')

    def crossval(self, name):
        call_command(
            'crossval', manifest=self.manifest, out=str(self.out / name), patch_size=64, stride=64,
            model_scale='tiny', epochs=2, batch_size=8, lr=0.01, seed=5, augment=False, stdout=io.StringIO(),
        )
        return self.out / name

    def test_crossval_is_deterministic(self):
        first, second = self.crossval('first'), self.crossval('second')
        self.assertEqual((first / 'report.json').read_bytes(), (second / 'report.json').read_bytes())
        self.assertEqual((first / 'posteriors.jsonl').read_bytes(), (second / 'posteriors.jsonl').read_bytes())
        self.assertEqual((first / 'report.xlsx').read_bytes(), (second / 'report.xlsx').read_bytes())

        report = json.loads((first / 'report.json').read_text())
        self.assertEqual(report['summary']['n_folds'], 4)
        self.assertEqual(report['run_config']['SEED'], 5)
        self.assertEqual(len(list((first / 'logs').glob('fold_*.jsonl'))), 4)
        self.assertTrue((first / 'checkpoints' / 'full.bmck').exists())
        self.assertTrue((first / 'report.xlsx').exists())

        painting_ids = {json.loads(line)['painting_id'] for line in (first / 'posteriors.jsonl').read_text().splitlines()}
        self.assertIn('hybrid_painting_1', painting_ids)

        call_command(
            'entropy', posteriors=str(first / 'posteriors.jsonl'), annotations=str(self.out / 'corpus' / 'annotations.jsonl'),
            out=str(self.out / 'entropy'), stdout=io.StringIO(),
        )
        self.assertTrue((self.out / 'entropy' / pipeline.ENTROPY_NAME).exists())

        call_command(
            'report', posteriors=str(first / 'posteriors.jsonl'), manifest=self.manifest,
            out=str(self.out / 'report'), stdout=io.StringIO(),
        )
        self.assertEqual(Image.open(self.out / 'report' / 'heatmaps' / 'robot_painting_1_entropy.png').size, (192, 192))

    def test_baseline_and_extract(self):
        call_command(
            'baseline', manifest=self.manifest, out=str(self.out / 'baseline'), patch_size=64, stride=64,
            n_trees=5, stdout=io.StringIO(),
        )
        report = json.loads((self.out / 'baseline' / 'report.json').read_text())
        self.assertEqual(report['model_family'], 'lbp_rf')
        self.assertEqual(report['summary']['n_folds'], 4)

        call_command('extract', manifest=self.manifest, out=str(self.out / 'cache'), patch_size=64, stride=64,
                     stdout=io.StringIO())
        patches = read_patch_cache(self.out / 'cache' / 'patches.bmpc')
        self.assertEqual(len(patches), 5 * 9)
        self.assertTrue(any(patch.label is None for patch in patches))

    def test_train_single_fold(self):
        call_command(
            'train', manifest=self.manifest, heldout='human_painting_1', out=str(self.out / 'train'),
            patch_size=64, stride=64, model_scale='tiny', epochs=1, batch_size=8, augment=False, stdout=io.StringIO(),
        )
        self.assertTrue((self.out / 'train' / 'fold_00_human_painting_1.json').exists())
        with self.assertRaises(CommandError):
            call_command('train', manifest=self.manifest, heldout='hybrid_painting_1', out=str(self.out / 't2'),
                         patch_size=64, stride=64, model_scale='tiny', epochs=1)


@tag('slow')
class SyntheticCorpusTests(TestCase):
    """
    Desk-scale runs on a small synthetic corpus: 3 human-style and 3
    robot-style 240-pixel canvases, 48-pixel patches, tiny network.
    The corpus and both cross-validations are computed once for the class.
    """

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.tmp = tempfile.TemporaryDirectory()
        out = Path(cls.tmp.name)
        call_command(
            'synth', out=str(out / 'corpus'), n_human=3, n_robot=3, n_hybrid=0, size=240, patch_size=48,
            seed=7, stdout=io.StringIO(),
        )
        manifest = str(out / 'corpus' / 'manifest.jsonl')
        call_command(
            'crossval', manifest=manifest, out=str(out / 'cnn'), patch_size=48, stride=48, model_scale='tiny',
            epochs=20, batch_size=16, lr=0.01, seed=7, augment=False, single_patch_seeds=3, stdout=io.StringIO(),
        )
        call_command(
            'baseline', manifest=manifest, out=str(out / 'rf'), patch_size=48, stride=48, seed=7,
            stdout=io.StringIO(),
        )
        cls.cnn = json.loads((out / 'cnn' / 'report.json').read_text())
        cls.rf = json.loads((out / 'rf' / 'report.json').read_text())

    @classmethod
    def tearDownClass(cls):
        cls.tmp.cleanup()
        super().tearDownClass()

    def test_pure_styles_are_separable(self):
        """Held-out pure patches are classified with at least 85% accuracy."""
        self.assertEqual(self.cnn['summary']['n_folds'], 6)
        self.assertGreaterEqual(self.cnn['summary']['mean_accuracy'], 0.85)

    def test_majority_vote(self):
        """At least five of the six held-out paintings get the right painting-level verdict."""
        self.assertEqual(self.cnn['summary']['vote_total'], 6)
        self.assertGreaterEqual(self.cnn['summary']['vote_correct'], 5)

    def test_single_patch_regime_degrades(self):
        """One training patch per painting loses at least ten points against full tiling."""
        single = self.cnn['single_patch']
        self.assertEqual(len(single['accuracies']), 3)
        self.assertGreaterEqual(self.cnn['summary']['mean_accuracy'] - single['mean_accuracy'], 0.10)

    def test_texture_baseline_does_not_beat_cnn(self):
        """LBP + random forest over the same folds scores no higher than the CNN."""
        self.assertEqual(
            [f['held_out_painting'] for f in self.rf['folds']],
            [f['held_out_painting'] for f in self.cnn['folds']],
        )
        self.assertLessEqual(self.rf['summary']['mean_accuracy'], self.cnn['summary']['mean_accuracy'])
