"""
Leave-one-painting-out cross-validation.

One fold per pure painting: the fold's model trains on every other pure
painting and is evaluated on all patches of the held-out one. Hybrid
paintings never enter a fold. Fold results are reduced in fold order, so
reports do not depend on the order in which parallel folds finish.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from django.conf import settings

from apps.core.exceptions import LeakageError, UsageError
from apps.core.seeding import rng_for
from apps.evaluation.metrics import aggregate_fold_accuracies, compute_metrics, metrics_from_confusion
from apps.evaluation.voting import Verdict, majority_vote, painting_accuracy
from apps.patches.extraction import DEFAULT_PATCH_SIZE, DEFAULT_STRIDE, stack_pixels
from apps.patches.labels import CLASS_NAMES, Author, PatchLabel
from apps.patches.manifest import load_entry_patches
from apps.training.trainer import eval_batch_size, train_fold

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
CNN = 'cnn'


@dataclass(frozen=True)
class FoldSpec:
    fold_index: int
    heldout_index: int
    train_indices: tuple


@dataclass
class FoldResult:
    """
    Outcome of one fold.

    posteriors, coords and labels are aligned with the held-out painting's
    patches and kept for entropy analysis and heatmaps.
    """
    fold_index: int
    held_out_painting: str
    author: str
    patch_accuracy: float
    per_class_recall: list
    per_class_precision: list
    balanced_accuracy: float
    confusion: np.ndarray
    painting_vote: Verdict
    best_epoch: int = None
    final_epoch: int = None
    final_accuracy: float = None
    coords: list = field(default_factory=list)
    labels: list = field(default_factory=list)
    posteriors: np.ndarray = None
    patch_size: int = DEFAULT_PATCH_SIZE


@dataclass
class SinglePatchResult:
    mean_accuracy: float
    std_accuracy: float
    accuracies: list
    skipped: list


@dataclass
class CrossValReport:
    model_family: str
    folds: list
    mean_accuracy: float
    std_accuracy: float
    final_mean_accuracy: float
    final_std_accuracy: float
    pooled_balanced_accuracy: float
    fold_mean_balanced_accuracy: float
    fold_std_balanced_accuracy: float
    per_class_accuracy: list
    confusion: np.ndarray
    normalized_confusion: np.ndarray
    vote_correct: int
    vote_total: int
    vote_accuracy: float
    single_patch: SinglePatchResult = None


def check_lopo_preconditions(entries):
    pure = [entry for entry in entries if entry.is_pure]
    authors = {entry.author for entry in pure}
    if len(pure) < 2 or authors != {Author.HUMAN, Author.ROBOT}:
        raise UsageError(
            f'Leave-one-painting-out needs at least two pure paintings covering both authors; '
            f'got {len(pure)} pure painting(s) with authors {sorted(a.value for a in authors)}'
        )


def build_folds(entries):
    """
    One FoldSpec per pure manifest entry.

    Raises:
        LeakageError: a held-out painting id also appears among its training paintings
    """
    pure = [index for index, entry in enumerate(entries) if entry.is_pure]
    folds = []
    for fold_index, heldout in enumerate(pure):
        train = tuple(index for index in pure if index != heldout)
        overlap = {entries[heldout].painting_id} & {entries[index].painting_id for index in train}
        if overlap:
            raise LeakageError(overlap)
        folds.append(FoldSpec(fold_index, heldout, train))
    return folds


def predict_patches(network, patches):
    return network.predict_proba(stack_pixels(patches, network.dtype), eval_batch_size())


def fold_result_from_posteriors(fold_index, entry, patches, posteriors, **extra):
    posteriors = np.asarray(posteriors, dtype=np.float64)
    labels = [int(p.label) for p in patches]
    preds = posteriors.argmax(axis=1)
    metrics = compute_metrics(preds, labels)
    return FoldResult(
        fold_index=fold_index,
        held_out_painting=entry.painting_id,
        author=entry.author.value,
        patch_accuracy=metrics.accuracy,
        per_class_recall=metrics.per_class_recall,
        per_class_precision=metrics.per_class_precision,
        balanced_accuracy=metrics.balanced_accuracy,
        confusion=metrics.confusion,
        painting_vote=majority_vote(preds, posteriors),
        coords=[(p.x, p.y) for p in patches],
        labels=labels,
        posteriors=posteriors,
        patch_size=patches[0].size,
        **extra,
    )


def split_patches(spec, patches_by_entry):
    train = [patch for index in spec.train_indices for patch in patches_by_entry[index]]
    return train, list(patches_by_entry[spec.heldout_index])


def run_fold(entries, patches_by_entry, spec, model_cfg, train_cfg, out_dir=None):
    """Train and evaluate one fold; checkpoints and logs go under out_dir when given."""
    entry = entries[spec.heldout_index]
    train_patches, heldout_patches = split_patches(spec, patches_by_entry)
    logger.info('Starting fold %d (held out %s)', spec.fold_index, entry.painting_id)

    log_path = checkpoint_path = None
    if out_dir:
        stem = f'fold_{spec.fold_index:02d}_{entry.painting_id}'
        log_path = Path(out_dir) / 'logs' / f'{stem}.jsonl'
        checkpoint_path = Path(out_dir) / 'checkpoints' / f'{stem}.bmck'

    checkpoint = train_fold(train_patches, heldout_patches, model_cfg, train_cfg, entry.painting_id, log_path)
    if checkpoint_path:
        checkpoint.save(checkpoint_path)
    posteriors = predict_patches(checkpoint.to_network(), heldout_patches)
    result = fold_result_from_posteriors(
        spec.fold_index, entry, heldout_patches, posteriors,
        best_epoch=checkpoint.epoch, final_epoch=checkpoint.final_epoch,
        final_accuracy=checkpoint.final_val_accuracy,
    )
    logger.info(
        'Finished fold %d (%s): accuracy %.4f at epoch %d, vote %s',
        spec.fold_index, entry.painting_id, result.patch_accuracy, result.best_epoch, result.painting_vote.value,
    )
    return result


def load_patches_by_entry(entries, patch_size=DEFAULT_PATCH_SIZE, stride=DEFAULT_STRIDE, pure_only=True):
    return {
        index: load_entry_patches(entry, patch_size, stride)
        for index, entry in enumerate(entries)
        if entry.is_pure or not pure_only
    }


def _use_workers():
    return getattr(settings, 'BRUSHMARK_PARALLEL_FOLDS', False) and not getattr(settings, 'CELERY_TASK_ALWAYS_EAGER', True)


def _dispatch_folds(manifest_path, folds, model_cfg, train_cfg, patch_size, stride, out_dir):
    from celery import group

    from apps.evaluation.tasks import run_fold_task

    logger.info('Dispatching %d folds to Celery workers', len(folds))
    job = group(
        run_fold_task.s(
            str(manifest_path), spec.fold_index, model_cfg.to_dict(), train_cfg.to_dict(),
            patch_size, stride, str(out_dir) if out_dir else None,
        )
        for spec in folds
    )
    results = [fold_result_from_dict(data) for data in job.apply_async().get()]
    return sorted(results, key=lambda result: result.fold_index)


def run_lopo(entries, model_cfg, train_cfg, patch_size=DEFAULT_PATCH_SIZE, stride=DEFAULT_STRIDE,
             out_dir=None, manifest_path=None, patches_by_entry=None):
    """
    Full leave-one-painting-out run.

    Folds go to Celery workers when BRUSHMARK_PARALLEL_FOLDS is set, Celery is
    not eager and a manifest path is available; otherwise they run in-process.

    Returns:
        CrossValReport
    """
    check_lopo_preconditions(entries)
    folds = build_folds(entries)
    logger.info('Leave-one-painting-out over %d folds', len(folds))

    if manifest_path and _use_workers():
        results = _dispatch_folds(manifest_path, folds, model_cfg, train_cfg, patch_size, stride, out_dir)
    else:
        if patches_by_entry is None:
            patches_by_entry = load_patches_by_entry(entries, patch_size, stride)
        results = [run_fold(entries, patches_by_entry, spec, model_cfg, train_cfg, out_dir) for spec in folds]
    return build_report(results, CNN)


def build_report(folds, model_family, single_patch=None):
    folds = sorted(folds, key=lambda fold: fold.fold_index)
    mean, std = aggregate_fold_accuracies([fold.patch_accuracy for fold in folds])
    finals = [fold.final_accuracy for fold in folds]
    if all(value is not None for value in finals):
        final_mean, final_std = aggregate_fold_accuracies(finals)
    else:
        final_mean = final_std = None
    balanced_mean, balanced_std = aggregate_fold_accuracies([fold.balanced_accuracy for fold in folds])

    confusion = np.sum([fold.confusion for fold in folds], axis=0).astype(np.int64)
    pooled = metrics_from_confusion(confusion)
    correct, total, vote_accuracy = painting_accuracy(
        [fold.painting_vote for fold in folds], [fold.author for fold in folds],
    )
    return CrossValReport(
        model_family=model_family,
        folds=folds,
        mean_accuracy=mean,
        std_accuracy=std,
        final_mean_accuracy=final_mean,
        final_std_accuracy=final_std,
        pooled_balanced_accuracy=pooled.balanced_accuracy,
        fold_mean_balanced_accuracy=balanced_mean,
        fold_std_balanced_accuracy=balanced_std,
        per_class_accuracy=pooled.per_class_recall,
        confusion=confusion,
        normalized_confusion=pooled.normalized_confusion,
        vote_correct=correct,
        vote_total=total,
        vote_accuracy=vote_accuracy,
        single_patch=single_patch,
    )


def single_patch_regime(entries, model_cfg, train_cfg, n_seeds=10, patch_size=DEFAULT_PATCH_SIZE,
                        stride=DEFAULT_STRIDE, patches_by_entry=None):
    """
    Leave-one-painting-out with one training and one test patch per painting.

    For every seed, each pure painting contributes one uniformly drawn
    non-blank patch for training and a different one (when it has two) for
    testing. The seed's accuracy is the fraction of folds whose test patch
    is classified correctly by the final-epoch model.

    Raises:
        UsageError: fewer than three pure paintings have non-blank patches
    """
    check_lopo_preconditions(entries)
    if n_seeds < 1:
        raise UsageError('single_patch_regime needs at least one seed')
    if patches_by_entry is None:
        patches_by_entry = load_patches_by_entry(entries, patch_size, stride)

    candidates = {}
    skipped = []
    for index, entry in enumerate(entries):
        if not entry.is_pure:
            continue
        non_blank = [p for p in patches_by_entry[index] if p.label is not PatchLabel.BLANK]
        if non_blank:
            candidates[index] = non_blank
        else:
            logger.warning('Single-patch regime: %s has no non-blank patches, skipped', entry.painting_id)
            skipped.append(entry.painting_id)
    kept = [entry for index, entry in enumerate(entries) if index in candidates]
    check_lopo_preconditions(kept)
    if len(kept) < 3:
        raise UsageError(
            f'The single-patch regime needs at least three pure paintings with non-blank patches '
            f'(each training split must hold two patches); got {len(kept)}'
        )

    accuracies = []
    for seed in range(n_seeds):
        rng = rng_for('single-patch', train_cfg.seed, seed)
        train_pick, test_pick = {}, {}
        for index, patches in candidates.items():
            order = rng.permutation(len(patches))
            train_pick[index] = [patches[order[0]]]
            test_pick[index] = [patches[order[1] if len(order) > 1 else order[0]]]

        correct = 0
        indices = sorted(candidates)
        for heldout in indices:
            train = [patch for index in indices if index != heldout for patch in train_pick[index]]
            checkpoint = train_fold(train, test_pick[heldout], model_cfg, train_cfg,
                                    f'{entries[heldout].painting_id}#seed{seed}')
            # scored by the final epoch, never the selected one
            correct += int(checkpoint.final_val_accuracy == 1.0)
        accuracies.append(correct / len(indices))
        logger.info('Single-patch seed %d: accuracy %.4f', seed, accuracies[-1])

    mean, std = aggregate_fold_accuracies(accuracies)
    return SinglePatchResult(mean_accuracy=mean, std_accuracy=std, accuracies=accuracies, skipped=skipped)


def posterior_rows(entry, patches, posteriors):
    """Flat per-patch posterior records for the posteriors file."""
    rows = []
    for patch, posterior in zip(patches, np.asarray(posteriors, dtype=np.float64)):
        rows.append({
            'painting_id': entry.painting_id,
            'author': entry.author.value,
            'x': patch.x,
            'y': patch.y,
            'size': patch.size,
            'label': None if patch.label is None else int(patch.label),
            'p_blank': float(posterior[0]),
            'p_human': float(posterior[1]),
            'p_robot': float(posterior[2]),
        })
    return rows


def _optional_list(values):
    return [None if v is None else float(v) for v in values]


def fold_result_to_dict(result):
    return {
        'fold_index': result.fold_index,
        'held_out_painting': result.held_out_painting,
        'author': result.author,
        'patch_accuracy': result.patch_accuracy,
        'per_class_recall': _optional_list(result.per_class_recall),
        'per_class_precision': _optional_list(result.per_class_precision),
        'balanced_accuracy': result.balanced_accuracy,
        'confusion': np.asarray(result.confusion).tolist(),
        'painting_vote': Verdict(result.painting_vote).value,
        'best_epoch': result.best_epoch,
        'final_epoch': result.final_epoch,
        'final_accuracy': result.final_accuracy,
        'coords': [list(c) for c in result.coords],
        'labels': list(result.labels),
        'posteriors': None if result.posteriors is None else np.asarray(result.posteriors).tolist(),
        'patch_size': result.patch_size,
    }


def fold_result_from_dict(data):
    data = dict(data)
    data['confusion'] = np.asarray(data['confusion'], dtype=np.int64)
    data['painting_vote'] = Verdict(data['painting_vote'])
    data['coords'] = [tuple(c) for c in data['coords']]
    if data.get('posteriors') is not None:
        data['posteriors'] = np.asarray(data['posteriors'], dtype=np.float64)
    return FoldResult(**data)


def _round(value, digits=6):
    return None if value is None else round(float(value), digits)


def report_to_dict(report, run_config=None):
    """Versioned, JSON-ready form of a CrossValReport (posteriors are written separately)."""
    single = report.single_patch
    return {
        'schema_version': SCHEMA_VERSION,
        'model_family': report.model_family,
        'class_names': CLASS_NAMES,
        'run_config': run_config or {},
        'summary': {
            'n_folds': len(report.folds),
            'mean_accuracy': _round(report.mean_accuracy),
            'std_accuracy': _round(report.std_accuracy),
            'final_mean_accuracy': _round(report.final_mean_accuracy),
            'final_std_accuracy': _round(report.final_std_accuracy),
            'pooled_balanced_accuracy': _round(report.pooled_balanced_accuracy),
            'fold_mean_balanced_accuracy': _round(report.fold_mean_balanced_accuracy),
            'fold_std_balanced_accuracy': _round(report.fold_std_balanced_accuracy),
            'per_class_accuracy': [_round(v) for v in report.per_class_accuracy],
            'vote_correct': report.vote_correct,
            'vote_total': report.vote_total,
            'vote_accuracy': _round(report.vote_accuracy),
        },
        'confusion': np.asarray(report.confusion).tolist(),
        'normalized_confusion': [[_round(v) for v in row] for row in report.normalized_confusion],
        'folds': [
            {
                'fold_index': fold.fold_index,
                'held_out_painting': fold.held_out_painting,
                'author': fold.author,
                'n_patches': int(np.asarray(fold.confusion).sum()),
                'patch_accuracy': _round(fold.patch_accuracy),
                'per_class_recall': [_round(v) for v in fold.per_class_recall],
                'per_class_precision': [_round(v) for v in fold.per_class_precision],
                'balanced_accuracy': _round(fold.balanced_accuracy),
                'best_epoch': fold.best_epoch,
                'final_epoch': fold.final_epoch,
                'final_accuracy': _round(fold.final_accuracy),
                'painting_vote': Verdict(fold.painting_vote).value,
                'confusion': np.asarray(fold.confusion).tolist(),
            }
            for fold in report.folds
        ],
        'single_patch': None if single is None else {
            'mean_accuracy': _round(single.mean_accuracy),
            'std_accuracy': _round(single.std_accuracy),
            'accuracies': [_round(v) for v in single.accuracies],
            'skipped': list(single.skipped),
        },
    }
