"""
Per-fold training loop.

Mini-batch SGD with momentum on augmented training patches, evaluation of
the raw held-out patches every eval_every epochs, and selection of the
earliest epoch with the highest held-out accuracy.
"""

import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from django.conf import settings

from apps.core.exceptions import (
    ConfigurationError, DivergenceError, LeakageError, NumericError, UsageError,
)
from apps.core.seeding import derive_seed, patch_rng, rng_for
from apps.network.config import ModelConfig
from apps.network.network import build
from apps.patches.augment import augment
from apps.patches.extraction import label_counts, stack_pixels
from apps.patches.manifest import write_jsonl
from apps.tensor import checkpoint as checkpoint_format
from apps.tensor.ops import weighted_cross_entropy
from apps.tensor.optim import OptimizerState, sgd_momentum_step
from apps.training.schedule import epoch_schedule, merge_singleton_tail
from apps.training.weights import compute_class_weights

logger = logging.getLogger(__name__)


@dataclass
class EpochRecord:
    """One line of the training log."""
    fold: str
    epoch: int
    train_loss: float
    val_accuracy: float = None


@dataclass
class Checkpoint:
    """
    Network state captured at the selected epoch.

    final_epoch / final_val_accuracy describe the last epoch of the run so
    reports can show both the selected and the final model.
    """
    state: dict
    epoch: int
    val_accuracy: float
    fold_id: str
    model_config: ModelConfig
    history: list = field(default_factory=list)
    final_epoch: int = None
    final_val_accuracy: float = None

    def to_network(self):
        network = build(self.model_config)
        network.load_state_dict(self.state)
        return network.eval()

    def save(self, path):
        return checkpoint_format.save_checkpoint(
            path, self.state, self.epoch, self.val_accuracy, self.fold_id, self.model_config.to_dict(),
        )

    @classmethod
    def load(cls, path):
        decoded = checkpoint_format.load_checkpoint(path)
        return cls(
            state=decoded.tensors, epoch=decoded.epoch, val_accuracy=decoded.val_accuracy,
            fold_id=decoded.fold_id, model_config=ModelConfig.from_dict(decoded.config),
        )


def select_checkpoint(history):
    """Earliest evaluated epoch with the maximal held-out accuracy (None if nothing was evaluated)."""
    best = None
    for record in history:
        if record.val_accuracy is None:
            continue
        if best is None or record.val_accuracy > best.val_accuracy:
            best = record
    return best


def assert_no_leakage(train_patches, heldout_patches):
    overlap = {p.painting_id for p in train_patches} & {p.painting_id for p in heldout_patches}
    if overlap:
        raise LeakageError(overlap)


def eval_batch_size():
    return getattr(settings, 'BRUSHMARK_EVAL_BATCH_SIZE', 32)


def patch_accuracy(network, patches):
    predictions = network.predict(stack_pixels(patches, network.dtype), eval_batch_size())
    labels = np.array([int(p.label) for p in patches])
    return float(np.mean(predictions == labels))


def _augmented_batch(patches, indices, train_cfg, epoch, dtype):
    aug = train_cfg.augmentation
    if aug is None:
        return stack_pixels([patches[i] for i in indices], dtype)
    stream_seed = derive_seed(train_cfg.seed, aug.seed)
    pixels = [
        augment(patches[i].pixels, aug, patch_rng(stream_seed, patches[i].painting_id, patches[i].x, patches[i].y, epoch))
        for i in indices
    ]
    return np.stack(pixels).astype(dtype)[:, None, :, :]


def _prepare_training_split(patches, train_cfg):
    if any(p.label is None for p in patches):
        raise UsageError('Training patches must be labeled (hybrid paintings cannot be used for training)')
    if len(patches) < 2:
        raise ConfigurationError('A training split needs at least two patches (batch norm needs N >= 2)')
    weights = compute_class_weights(label_counts(patches), train_cfg.alphas, present_only=True)
    targets = np.array([int(p.label) for p in patches])
    return weights, targets


def _run_epoch(network, state, patches, targets, loss_weights, train_cfg, epoch, fold_id):
    network.train()
    params = network.parameters()
    batches = merge_singleton_tail(epoch_schedule(len(patches), train_cfg.batch_size, train_cfg.seed, epoch))
    dropout_rng = rng_for('dropout', train_cfg.seed, fold_id, epoch)
    total_loss = 0.0
    for batch_index, indices in enumerate(batches):
        pixels = _augmented_batch(patches, indices, train_cfg, epoch, network.dtype)
        network.zero_grad()
        try:
            loss = weighted_cross_entropy(network.forward(pixels, rng=dropout_rng), targets[indices], loss_weights)
            loss.backward()
        except NumericError as exc:
            raise DivergenceError(epoch, batch_index, float('nan')) from exc
        value = loss.item()
        if not np.isfinite(value):
            raise DivergenceError(epoch, batch_index, value)
        sgd_momentum_step(params, [p.grad for p in params], state)
        total_loss += value * len(indices)
        logger.debug('fold %s epoch %d batch %d loss %.5f', fold_id, epoch, batch_index, value)
    return total_loss / len(patches)


def _write_log(log_path, history):
    if log_path:
        write_jsonl(Path(log_path), [asdict(record) for record in history])


def train_fold(train_patches, heldout_patches, model_cfg, train_cfg, fold_id='', log_path=None):
    """
    Train one leave-one-painting-out fold.

    Args:
        train_patches: Labeled PatchRecords from the training paintings
        heldout_patches: Labeled PatchRecords from the held-out painting
        model_cfg: ModelConfig
        train_cfg: TrainConfig
        fold_id: Fold identifier (the held-out painting id)
        log_path: Optional JSON Lines training log

    Returns:
        Checkpoint of the best evaluated epoch

    Raises:
        LeakageError: a painting id appears in both splits
        UsageError: empty held-out set
        DivergenceError: non-finite loss
    """
    assert_no_leakage(train_patches, heldout_patches)
    if not heldout_patches:
        raise UsageError(f'Fold {fold_id!r} has no held-out patches')
    if any(p.label is None for p in heldout_patches):
        raise UsageError('Held-out patches must be labeled')
    weights, targets = _prepare_training_split(train_patches, train_cfg)

    network = build(model_cfg, seed=derive_seed('fold', train_cfg.seed, fold_id))
    state = OptimizerState.for_parameters(network.parameters(), train_cfg.lr, train_cfg.momentum)
    logger.info(
        'Fold %s: %d training patches %s, %d held-out patches, weights %s',
        fold_id, len(train_patches), list(weights.counts), len(heldout_patches),
        np.round(weights.as_array(), 4).tolist(),
    )

    history = []
    best_state = None
    best_accuracy = None
    for epoch in range(1, train_cfg.epochs + 1):
        train_loss = _run_epoch(network, state, train_patches, targets, weights.loss_weights(), train_cfg, epoch, fold_id)
        record = EpochRecord(fold=fold_id, epoch=epoch, train_loss=train_loss)
        if epoch % train_cfg.eval_every == 0 or epoch == train_cfg.epochs:
            record.val_accuracy = patch_accuracy(network, heldout_patches)
            if best_accuracy is None or record.val_accuracy > best_accuracy:
                best_accuracy = record.val_accuracy
                best_state = network.state_dict()
        history.append(record)
        logger.info('Fold %s epoch %d: loss %.5f, held-out accuracy %s', fold_id, epoch, train_loss, record.val_accuracy)

    _write_log(log_path, history)
    best = select_checkpoint(history)
    final = history[-1]
    logger.info('Fold %s: best epoch %d (accuracy %.4f)', fold_id, best.epoch, best.val_accuracy)
    return Checkpoint(
        state=best_state, epoch=best.epoch, val_accuracy=best.val_accuracy, fold_id=fold_id,
        model_config=model_cfg, history=history,
        final_epoch=final.epoch, final_val_accuracy=final.val_accuracy,
    )


def train_full(patches, model_cfg, train_cfg, epochs=None, fold_id='full', log_path=None):
    """
    Train on every given patch with no held-out set and return the final epoch.

    Used to score hybrid paintings with a model that saw only pure paintings.
    val_accuracy of the returned checkpoint is the unaugmented training accuracy.
    """
    epochs = epochs or train_cfg.epochs
    weights, targets = _prepare_training_split(patches, train_cfg)
    network = build(model_cfg, seed=derive_seed('fold', train_cfg.seed, fold_id))
    state = OptimizerState.for_parameters(network.parameters(), train_cfg.lr, train_cfg.momentum)

    history = []
    for epoch in range(1, epochs + 1):
        train_loss = _run_epoch(network, state, patches, targets, weights.loss_weights(), train_cfg, epoch, fold_id)
        history.append(EpochRecord(fold=fold_id, epoch=epoch, train_loss=train_loss))
        logger.info('Full run epoch %d: loss %.5f', epoch, train_loss)
    _write_log(log_path, history)

    accuracy = patch_accuracy(network, patches)
    return Checkpoint(
        state=network.state_dict(), epoch=epochs, val_accuracy=accuracy, fold_id=fold_id,
        model_config=model_cfg, history=history, final_epoch=epochs, final_val_accuracy=accuracy,
    )
