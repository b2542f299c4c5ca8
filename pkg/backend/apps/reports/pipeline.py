"""
Subcommand pipelines.

Each function takes a resolved RunConfig plus paths, does the work and writes
its outputs under out_dir from this process only. Management commands are
thin wrappers around these functions.
"""

import logging
import math
from collections import OrderedDict
from pathlib import Path

import numpy as np

from apps.baseline.crossval import run_baseline_lopo
from apps.baseline.forest import predict_forest, train_forest
from apps.baseline.lbp import feature_matrix
from apps.core.exceptions import UsageError
from apps.entropy.analysis import analyze_posteriors, comparison_to_dict
from apps.entropy.annotations import read_annotations
from apps.entropy.conditional import conditional_entropy
from apps.evaluation.crossval import (
    build_folds, check_lopo_preconditions, fold_result_to_dict, load_patches_by_entry, posterior_rows,
    predict_patches, report_to_dict, run_fold, run_lopo, single_patch_regime,
)
from apps.evaluation.posteriors import fold_posterior_rows, group_by_painting, read_posteriors, write_posteriors
from apps.evaluation.voting import Verdict, majority_vote, painting_accuracy
from apps.patches.cache import write_patch_cache
from apps.patches.labels import Author, PatchLabel
from apps.patches.manifest import load_entry_image, load_manifest
from apps.reports import excel, heatmaps, writers
from apps.synth.corpus import emit_corpus
from apps.training.trainer import train_full

logger = logging.getLogger(__name__)

REPORT_NAME = 'report.json'
POSTERIORS_NAME = 'posteriors.jsonl'
ENTROPY_NAME = 'entropy.json'
VOTES_NAME = 'votes.json'
SUMMARY_NAME = 'summary.txt'


def _pure_training_patches(entries, patches_by_entry):
    return [patch for index, entry in enumerate(entries) if entry.is_pure for patch in patches_by_entry[index]]


def full_run_epochs(report, default):
    """Median selected epoch over the folds, rounded up (default when no fold selected one)."""
    epochs = [fold.best_epoch for fold in report.folds if fold.best_epoch is not None]
    if not epochs:
        return default
    return max(1, math.ceil(float(np.median(epochs))))


def _merge_rows(entries, pure_rows, hybrid_rows):
    rows = []
    for entry in entries:
        rows.extend(pure_rows.get(entry.painting_id, []) if entry.is_pure else hybrid_rows.get(entry.painting_id, []))
    return rows


def _write_report_files(out_dir, report_data, rows):
    out_dir = Path(out_dir)
    writers.write_json(out_dir / REPORT_NAME, report_data)
    write_posteriors(out_dir / POSTERIORS_NAME, rows)
    writers.write_confusion_csv(out_dir / 'confusion.csv', report_data['confusion'])
    writers.write_confusion_csv(out_dir / 'confusion_normalized.csv', report_data['normalized_confusion'])
    excel.write_workbook(out_dir / 'report.xlsx', report_data)
    writers.write_text(out_dir / SUMMARY_NAME, writers.crossval_summary(report_data))


def synth(run_config, out_dir, n_jobs=1):
    return emit_corpus(
        run_config['N_HUMAN'], run_config['N_ROBOT'], run_config['N_HYBRID'], size=run_config['SIZE'],
        base_seed=run_config.seed, out_dir=out_dir, patch_size=run_config['PATCH_SIZE'],
        mix=run_config['MIX'], n_jobs=n_jobs,
    )


def extract(run_config, manifest_path, out_path):
    """Patch cache of every painting in the manifest (hybrid patches unlabeled)."""
    entries = load_manifest(manifest_path)
    by_entry = load_patches_by_entry(entries, run_config['PATCH_SIZE'], run_config['STRIDE'], pure_only=False)
    patches = [patch for index in range(len(entries)) for patch in by_entry[index]]
    if not patches:
        raise UsageError(f'No patches extracted from {manifest_path}')
    write_patch_cache(out_path, patches)
    logger.info('Wrote %d patches to %s', len(patches), out_path)
    return len(patches)


def train(run_config, manifest_path, heldout, out_dir):
    """Train and evaluate the single fold that holds out painting `heldout`."""
    entries = load_manifest(manifest_path)
    check_lopo_preconditions(entries)
    folds = [spec for spec in build_folds(entries) if entries[spec.heldout_index].painting_id == heldout]
    if not folds:
        pure = ', '.join(entry.painting_id for entry in entries if entry.is_pure)
        raise UsageError(f'{heldout!r} is not a pure painting of the manifest (choose from {pure})')
    spec = folds[0]
    patches_by_entry = load_patches_by_entry(entries, run_config['PATCH_SIZE'], run_config['STRIDE'])
    result = run_fold(
        entries, patches_by_entry, spec, run_config.model_config(), run_config.train_config(), out_dir,
    )
    data = fold_result_to_dict(result)
    data['run_config'] = run_config.to_dict()
    writers.write_json(Path(out_dir) / f'fold_{spec.fold_index:02d}_{heldout}.json', data)
    write_posteriors(Path(out_dir) / POSTERIORS_NAME, fold_posterior_rows(entries[spec.heldout_index], result))
    return result


def crossval(run_config, manifest_path, out_dir):
    """
    Full leave-one-painting-out run of the CNN.

    Writes report.json, posteriors.jsonl (pure paintings from their fold
    model, hybrids from a model trained on every pure painting for the median
    selected epoch), checkpoints, per-fold logs, confusion CSVs, report.xlsx
    and summary.txt.
    """
    out_dir = Path(out_dir)
    entries = load_manifest(manifest_path)
    model_cfg, train_cfg = run_config.model_config(), run_config.train_config()
    size, stride = run_config['PATCH_SIZE'], run_config['STRIDE']
    patches_by_entry = load_patches_by_entry(entries, size, stride, pure_only=False)

    report = run_lopo(
        entries, model_cfg, train_cfg, size, stride, out_dir=out_dir,
        manifest_path=manifest_path, patches_by_entry=patches_by_entry,
    )
    if run_config['SINGLE_PATCH_SEEDS'] > 0:
        report.single_patch = single_patch_regime(
            entries, model_cfg, train_cfg, run_config['SINGLE_PATCH_SEEDS'], size, stride, patches_by_entry,
        )

    by_id = {entry.painting_id: entry for entry in entries}
    pure_rows = {
        fold.held_out_painting: fold_posterior_rows(by_id[fold.held_out_painting], fold) for fold in report.folds
    }
    hybrid_rows = {}
    hybrids = [(index, entry) for index, entry in enumerate(entries) if not entry.is_pure]
    if hybrids:
        epochs = full_run_epochs(report, train_cfg.epochs)
        logger.info('Scoring %d hybrid painting(s) with a %d-epoch model on all pure paintings', len(hybrids), epochs)
        checkpoint = train_full(
            _pure_training_patches(entries, patches_by_entry), model_cfg, train_cfg, epochs=epochs,
            log_path=out_dir / 'logs' / 'full.jsonl',
        )
        checkpoint.save(out_dir / 'checkpoints' / 'full.bmck')
        network = checkpoint.to_network()
        for index, entry in hybrids:
            patches = patches_by_entry[index]
            hybrid_rows[entry.painting_id] = posterior_rows(entry, patches, predict_patches(network, patches))

    report_data = report_to_dict(report, run_config.to_dict())
    _write_report_files(out_dir, report_data, _merge_rows(entries, pure_rows, hybrid_rows))
    return report_data


def baseline(run_config, manifest_path, out_dir):
    """LBP + random forest over the same folds; hybrids scored by a forest trained on every pure painting."""
    out_dir = Path(out_dir)
    entries = load_manifest(manifest_path)
    forest_cfg = run_config.forest_config()
    size, stride = run_config['PATCH_SIZE'], run_config['STRIDE']
    patches_by_entry = load_patches_by_entry(entries, size, stride, pure_only=False)

    report = run_baseline_lopo(entries, forest_cfg, size, stride, patches_by_entry=patches_by_entry)
    by_id = {entry.painting_id: entry for entry in entries}
    pure_rows = {
        fold.held_out_painting: fold_posterior_rows(by_id[fold.held_out_painting], fold) for fold in report.folds
    }
    hybrid_rows = {}
    hybrids = [(index, entry) for index, entry in enumerate(entries) if not entry.is_pure]
    if hybrids:
        pure = _pure_training_patches(entries, patches_by_entry)
        model = train_forest(
            feature_matrix(pure), np.array([int(p.label) for p in pure], dtype=np.int64), forest_cfg,
        )
        for index, entry in hybrids:
            patches = patches_by_entry[index]
            _, frequencies = predict_forest(model, feature_matrix(patches))
            hybrid_rows[entry.painting_id] = posterior_rows(entry, patches, frequencies)

    report_data = report_to_dict(report, run_config.to_dict())
    _write_report_files(out_dir, report_data, _merge_rows(entries, pure_rows, hybrid_rows))
    return report_data


def entropy(run_config, posteriors_path, out_dir, annotations_path=None):
    rows = read_posteriors(posteriors_path)
    regions = read_annotations(annotations_path) if annotations_path else None
    tau = run_config['TAU']
    records, comparison = analyze_posteriors(
        rows, tau, regions=regions, balance=run_config['BALANCED'], seed=run_config.seed,
    )
    data = comparison_to_dict(comparison, records, tau, run_config.to_dict())
    writers.write_json(Path(out_dir) / ENTROPY_NAME, data)
    writers.write_text(Path(out_dir) / 'entropy_summary.txt', writers.entropy_summary(data))
    return data


def _painting_extent(rows):
    return max(r['x'] + r['size'] for r in rows), max(r['y'] + r['size'] for r in rows)


def painting_votes(rows):
    """Majority-vote verdict per painting of a posteriors file."""
    votes = OrderedDict()
    for pid, painting_rows in group_by_painting(rows).items():
        posteriors = np.array([[r['p_blank'], r['p_human'], r['p_robot']] for r in painting_rows])
        preds = posteriors.argmax(axis=1)
        verdict = majority_vote(preds, posteriors)
        author = painting_rows[0]['author']
        votes[pid] = OrderedDict([
            ('author', author),
            ('verdict', verdict.value),
            ('n_patches', len(painting_rows)),
            ('n_blank', int(np.sum(preds == PatchLabel.BLANK))),
            ('n_human', int(np.sum(preds == PatchLabel.HUMAN))),
            ('n_robot', int(np.sum(preds == PatchLabel.ROBOT))),
            ('correct', None if author == Author.HYBRID.value else verdict is Verdict.for_author(author)),
        ])
    return votes


def vote(run_config, posteriors_path, out_dir):
    votes = painting_votes(read_posteriors(posteriors_path))
    pure = [(v['verdict'], v['author']) for v in votes.values() if v['author'] != Author.HYBRID.value]
    correct, total, accuracy = painting_accuracy([v for v, _ in pure], [a for _, a in pure])
    data = OrderedDict([
        ('run_config', run_config.to_dict()),
        ('paintings', votes),
        ('correct', correct),
        ('total', total),
        ('accuracy', accuracy),
    ])
    writers.write_json(Path(out_dir) / VOTES_NAME, data)
    return data


def report(run_config, posteriors_path, out_dir, manifest_path=None):
    """
    Class and entropy heatmaps per painting, plus summary.txt.

    Painting dimensions come from the manifest images when a manifest is
    given, otherwise from the extent of the posterior grid.
    """
    out_dir = Path(out_dir)
    rows = read_posteriors(posteriors_path)
    dimensions = {}
    if manifest_path:
        for entry in load_manifest(manifest_path):
            image = load_entry_image(entry)
            dimensions[entry.painting_id] = (image.width, image.height)

    tau = run_config['TAU']
    lines = [f'Heatmaps for {posteriors_path} (tau = {tau})', '']
    for pid, painting_rows in group_by_painting(rows).items():
        extent = dimensions.get(pid) or _painting_extent(painting_rows)
        coords = [(r['x'], r['y']) for r in painting_rows]
        size = painting_rows[0]['size']
        posteriors = np.array([[r['p_blank'], r['p_human'], r['p_robot']] for r in painting_rows])

        field = heatmaps.class_field(extent, posteriors.argmax(axis=1), (coords, size))
        heatmaps.save_rgb_png(out_dir / 'heatmaps' / f'{pid}_class.png', heatmaps.class_colors(field))

        values = [conditional_entropy(row, tau) for row in painting_rows]
        entropy_field = heatmaps.render_heatmap(extent, values, (coords, size))
        heatmaps.save_rgb_png(out_dir / 'heatmaps' / f'{pid}_entropy.png', heatmaps.entropy_colors(entropy_field))

        included = [v for v in values if v is not None]
        median = f'{float(np.median(included)):.4f}' if included else 'n/a'
        lines.append(
            f"{pid:<24} {painting_rows[0]['author']:<7} {extent[0]}x{extent[1]}  patches {len(painting_rows)}  "
            f"entropy median {median} over {len(included)} gated patches"
        )
    writers.write_text(out_dir / SUMMARY_NAME, '\n'.join(lines) + '\n')
    return out_dir
