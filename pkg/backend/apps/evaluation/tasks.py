"""
Celery tasks for fold-level parallelism.

Each task rebuilds the fold from the manifest, so workers only need access
to the image files; results come back as plain dictionaries.
"""

import logging

from celery import shared_task

from apps.evaluation.crossval import build_folds, fold_result_to_dict, run_fold
from apps.network.config import ModelConfig
from apps.patches.manifest import load_entry_patches, load_manifest
from apps.training.config import TrainConfig

logger = logging.getLogger(__name__)


@shared_task
def run_fold_task(manifest_path, fold_index, model_cfg, train_cfg, patch_size, stride, out_dir=None):
    """
    Train and evaluate one leave-one-painting-out fold.

    Args:
        manifest_path: Dataset manifest (JSON Lines)
        fold_index: Position of the fold among the manifest's pure paintings
        model_cfg: ModelConfig.to_dict()
        train_cfg: TrainConfig.to_dict()
        patch_size: Patch side length
        stride: Grid stride
        out_dir: Optional run directory for checkpoints and logs

    Returns:
        dict: fold_result_to_dict() of the FoldResult
    """
    entries = load_manifest(manifest_path)
    spec = build_folds(entries)[fold_index]
    patches_by_entry = {
        index: load_entry_patches(entries[index], patch_size, stride)
        for index in (spec.heldout_index, *spec.train_indices)
    }
    logger.info('Worker running fold %d of %s', fold_index, manifest_path)
    result = run_fold(
        entries, patches_by_entry, spec,
        ModelConfig.from_dict(model_cfg), TrainConfig.from_dict(train_cfg), out_dir,
    )
    return fold_result_to_dict(result)
