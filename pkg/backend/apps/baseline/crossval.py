"""Leave-one-painting-out evaluation of the LBP + random forest baseline."""

import logging

import numpy as np

from apps.baseline.forest import ForestConfig, predict_forest, train_forest
from apps.baseline.lbp import feature_matrix
from apps.core.exceptions import UsageError
from apps.evaluation.crossval import (
    build_folds, build_report, check_lopo_preconditions, fold_result_from_posteriors, load_patches_by_entry,
)
from apps.patches.extraction import DEFAULT_PATCH_SIZE, DEFAULT_STRIDE

logger = logging.getLogger(__name__)

LBP_RF = 'lbp_rf'


def run_baseline_lopo(entries, forest_cfg=None, patch_size=DEFAULT_PATCH_SIZE, stride=DEFAULT_STRIDE,
                      patches_by_entry=None):
    """
    Same folds and report schema as the CNN; posteriors are tree-vote frequencies.

    Returns:
        CrossValReport with model_family 'lbp_rf'
    """
    forest_cfg = forest_cfg or ForestConfig()
    check_lopo_preconditions(entries)
    folds = build_folds(entries)
    if patches_by_entry is None:
        patches_by_entry = load_patches_by_entry(entries, patch_size, stride)

    features = {index: feature_matrix(patches) for index, patches in patches_by_entry.items()}
    labels = {index: np.array([int(p.label) for p in patches], dtype=np.int64) for index, patches in patches_by_entry.items()}

    results = []
    for spec in folds:
        entry = entries[spec.heldout_index]
        if not patches_by_entry[spec.heldout_index]:
            raise UsageError(f'Fold {entry.painting_id!r} has no held-out patches')
        logger.info('Baseline fold %d (held out %s)', spec.fold_index, entry.painting_id)
        model = train_forest(
            np.concatenate([features[i] for i in spec.train_indices]),
            np.concatenate([labels[i] for i in spec.train_indices]),
            forest_cfg,
        )
        _, frequencies = predict_forest(model, features[spec.heldout_index])
        result = fold_result_from_posteriors(
            spec.fold_index, entry, patches_by_entry[spec.heldout_index], frequencies,
        )
        logger.info('Baseline fold %d (%s): accuracy %.4f', spec.fold_index, entry.painting_id, result.patch_accuracy)
        results.append(result)
    return build_report(results, LBP_RF)
