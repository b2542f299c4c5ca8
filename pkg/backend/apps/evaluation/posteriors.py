"""Posteriors file: JSON Lines, one patch per line (see PatchPosteriorSerializer)."""

from collections import OrderedDict

from apps.evaluation.serializers import PatchPosteriorSerializer
from apps.patches.manifest import read_jsonl, write_jsonl


def write_posteriors(path, rows):
    return write_jsonl(path, rows)


def read_posteriors(path):
    """Validated rows in file order."""
    return [dict(row) for row in read_jsonl(path, PatchPosteriorSerializer, 'posterior')]


def group_by_painting(rows):
    """OrderedDict painting_id -> rows, in first-seen order."""
    grouped = OrderedDict()
    for row in rows:
        grouped.setdefault(row['painting_id'], []).append(row)
    return grouped


def fold_posterior_rows(entry, fold):
    """Posterior rows of a fold's held-out painting, from the FoldResult alone."""
    rows = []
    for (x, y), label, posterior in zip(fold.coords, fold.labels, fold.posteriors):
        rows.append({
            'painting_id': entry.painting_id,
            'author': entry.author.value,
            'x': int(x),
            'y': int(y),
            'size': fold.patch_size,
            'label': None if label is None else int(label),
            'p_blank': float(posterior[0]),
            'p_human': float(posterior[1]),
            'p_robot': float(posterior[2]),
        })
    return rows
