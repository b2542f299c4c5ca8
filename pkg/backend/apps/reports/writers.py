"""
Report writers: versioned JSON, confusion CSV grids and plain-text summaries.

Every file is written from the calling process only, and the JSON renderer
keeps key order, so identical inputs give byte-identical files.
"""

import csv
import io
from pathlib import Path

from rest_framework.renderers import JSONRenderer

from apps.patches.labels import CLASS_NAMES


def render_json(data):
    return JSONRenderer().render(data, renderer_context={'indent': 2}) + b'\n'


def write_json(path, data):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(render_json(data))
    return path


def write_confusion_csv(path, matrix, class_names=CLASS_NAMES):
    """Rows are true classes, columns predicted classes."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(['true\\predicted', *class_names])
    for name, row in zip(class_names, matrix):
        writer.writerow([name, *row])
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(buffer.getvalue(), encoding='utf-8')
    return path


def _percent(value):
    return 'n/a' if value is None else f'{100 * value:.2f}%'


def crossval_summary(report_data):
    """Human-readable summary of a report_to_dict mapping."""
    summary = report_data['summary']
    lines = [
        f"Model family: {report_data['model_family']}",
        f"Folds: {summary['n_folds']}",
        f"Patch accuracy (best epoch): {_percent(summary['mean_accuracy'])} "
        f"+/- {_percent(summary['std_accuracy'])}",
    ]
    if summary['final_mean_accuracy'] is not None:
        lines.append(
            f"Patch accuracy (final epoch): {_percent(summary['final_mean_accuracy'])} "
            f"+/- {_percent(summary['final_std_accuracy'])}"
        )
    lines.append(f"Balanced accuracy (pooled): {_percent(summary['pooled_balanced_accuracy'])}")
    lines.append(
        "Per-class accuracy: " + ', '.join(
            f'{name} {_percent(value)}' for name, value in zip(report_data['class_names'], summary['per_class_accuracy'])
        )
    )
    lines.append(
        f"Majority vote: {summary['vote_correct']}/{summary['vote_total']} paintings "
        f"({_percent(summary['vote_accuracy'])})"
    )
    single = report_data.get('single_patch')
    if single:
        lines.append(
            f"Single-patch regime: {_percent(single['mean_accuracy'])} +/- {_percent(single['std_accuracy'])} "
            f"over {len(single['accuracies'])} seeds"
        )
    lines.append('')
    lines.append(f"{'fold':>4}  {'held out':<24} {'author':<7} {'accuracy':>9} {'epoch':>5}  vote")
    for fold in report_data['folds']:
        epoch = '-' if fold['best_epoch'] is None else fold['best_epoch']
        lines.append(
            f"{fold['fold_index']:>4}  {fold['held_out_painting']:<24} {fold['author']:<7} "
            f"{_percent(fold['patch_accuracy']):>9} {epoch:>5}  {fold['painting_vote']}"
        )
    return '\n'.join(lines) + '\n'


def entropy_summary(entropy_data):
    lines = [f"Conditional entropy (tau = {entropy_data['tau']})", '']
    for name, stats in entropy_data['categories'].items():
        tails = ', '.join(f'>{t}: {_percent(v)}' for t, v in stats['tail_fractions'].items())
        lines.append(
            f"{name:<7} n={stats['n_patches']:<6} median {stats['median']:.4f}  mean {stats['mean']:.4f}  "
            f"std {stats['std']:.4f}  IQR [{stats['iqr'][0]:.4f}, {stats['iqr'][1]:.4f}]  {tails}  "
            f"mean of medians {stats['median_mean']:.4f} +/- {stats['median_std']:.4f}"
        )
    lines.append('')
    for name, test in entropy_data['tests'].items():
        exact = 'n/a' if test['p_exact'] is None else f"{test['p_exact']:.6g}"
        lines.append(
            f"{name}: U={test['u']:g} (n={test['n_a']} vs {test['n_b']}), exact p={exact}, "
            f"normal p={test['p_normal']:.6g}"
        )
    return '\n'.join(lines) + '\n'


def write_text(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding='utf-8')
    return path
