"""
Random forest of Gini decision trees.

Every tree grows on a bootstrap sample and considers a random subset of
features at each node; split thresholds are midpoints between consecutive
distinct feature values (x <= threshold goes left). Trees train through
joblib and each tree draws from its own seeded stream, so the forest does
not depend on n_jobs.
"""

import logging
import math
from dataclasses import asdict, dataclass

import numpy as np
from joblib import Parallel, delayed

from apps.core.exceptions import ConfigurationError, UsageError
from apps.core.seeding import rng_for
from apps.patches.labels import NUM_CLASSES

logger = logging.getLogger(__name__)

LEAF = -1


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 100
    max_depth: int = 16
    min_leaf: int = 5
    features_per_split: int = None
    bootstrap: bool = True
    seed: int = 0
    n_jobs: int = 1

    def __post_init__(self):
        if self.n_trees < 1 or self.max_depth < 1 or self.min_leaf < 1:
            raise ConfigurationError('n_trees, max_depth and min_leaf must be >= 1')
        if self.features_per_split is not None and self.features_per_split < 1:
            raise ConfigurationError(f'features_per_split must be >= 1, got {self.features_per_split}')

    def split_features(self, n_features):
        wanted = self.features_per_split or math.floor(math.sqrt(n_features))
        return max(1, min(wanted, n_features))

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        return cls(**data)


@dataclass
class DecisionTree:
    """Flat node arrays; leaves have feature == LEAF."""
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    def predict(self, features):
        node = np.zeros(len(features), dtype=np.int64)
        active = self.feature[node] != LEAF
        while active.any():
            rows = np.nonzero(active)[0]
            current = node[rows]
            goes_left = features[rows, self.feature[current]] <= self.threshold[current]
            node[rows] = np.where(goes_left, self.left[current], self.right[current])
            active = self.feature[node] != LEAF
        return self.value[node]


@dataclass
class Forest:
    trees: list
    n_features: int
    config: ForestConfig


def gini(counts):
    counts = np.asarray(counts, dtype=np.float64)
    total = counts.sum(axis=-1)
    with np.errstate(invalid='ignore', divide='ignore'):
        impurity = 1.0 - ((counts / total[..., None]) ** 2).sum(axis=-1)
    return np.where(total > 0, impurity, 0.0)


def best_split(features, labels, candidates, min_leaf):
    """
    Lowest weighted Gini split over the candidate features.

    Returns:
        (feature, threshold, impurity) or None when no split keeps min_leaf
        samples on both sides
    """
    n = len(labels)
    onehot = np.eye(NUM_CLASSES, dtype=np.int64)[labels]
    totals = onehot.sum(axis=0)
    best = None
    for feature in candidates:
        order = np.argsort(features[:, feature], kind='stable')
        values = features[order, feature]
        left_counts = np.cumsum(onehot[order], axis=0)[:-1]
        right_counts = totals - left_counts
        sizes = np.arange(1, n)
        valid = (values[1:] > values[:-1]) & (sizes >= min_leaf) & (n - sizes >= min_leaf)
        if not valid.any():
            continue
        weighted = (sizes * gini(left_counts) + (n - sizes) * gini(right_counts)) / n
        weighted = np.where(valid, weighted, np.inf)
        position = int(np.argmin(weighted))
        if best is None or weighted[position] < best[2]:
            threshold = (values[position] + values[position + 1]) / 2.0
            best = (int(feature), float(threshold), float(weighted[position]))
    return best


def grow_tree(features, labels, config, rng):
    feature, threshold, left, right, value = [], [], [], [], []
    n_candidates = config.split_features(features.shape[1])

    def add_node(node_labels):
        feature.append(LEAF)
        threshold.append(0.0)
        left.append(LEAF)
        right.append(LEAF)
        counts = np.bincount(node_labels, minlength=NUM_CLASSES)
        value.append(int(np.argmax(counts)))
        return len(feature) - 1

    stack = [(np.arange(len(labels)), 0, None, None)]
    while stack:
        rows, depth, parent, side = stack.pop()
        node = add_node(labels[rows])
        if parent is not None:
            (left if side == 'left' else right)[parent] = node
        node_labels = labels[rows]
        if depth >= config.max_depth or len(rows) < 2 * config.min_leaf or np.all(node_labels == node_labels[0]):
            continue
        candidates = rng.choice(features.shape[1], size=n_candidates, replace=False)
        split = best_split(features[rows], node_labels, candidates, config.min_leaf)
        if split is None or split[2] >= gini(np.bincount(node_labels, minlength=NUM_CLASSES)):
            continue
        feature[node], threshold[node] = split[0], split[1]
        goes_left = features[rows, split[0]] <= split[1]
        stack.append((rows[~goes_left], depth + 1, node, 'right'))
        stack.append((rows[goes_left], depth + 1, node, 'left'))

    return DecisionTree(
        feature=np.array(feature, dtype=np.int64), threshold=np.array(threshold),
        left=np.array(left, dtype=np.int64), right=np.array(right, dtype=np.int64),
        value=np.array(value, dtype=np.int64),
    )


def _train_tree(features, labels, config, tree_index):
    rng = rng_for('forest', config.seed, tree_index)
    if config.bootstrap:
        rows = rng.integers(0, len(labels), len(labels))
        return grow_tree(features[rows], labels[rows], config, rng)
    return grow_tree(features, labels, config, rng)


def train_forest(features, labels, config=None):
    """
    Train a random forest.

    A training set with a single class gives a constant predictor and a warning.

    Raises:
        UsageError: no samples, or features and labels disagree in length
    """
    config = config or ForestConfig()
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if features.ndim != 2 or len(features) == 0 or len(features) != len(labels):
        raise UsageError(f'train_forest needs an [N, F] feature matrix with N labels, got {features.shape} and {labels.shape}')
    if np.unique(labels).size < 2:
        logger.warning('Forest trained on a single class (%d); every prediction will be that class', labels[0])

    trees = Parallel(n_jobs=config.n_jobs)(
        delayed(_train_tree)(features, labels, config, index) for index in range(config.n_trees)
    )
    logger.info('Trained %d trees on %d samples', len(trees), len(labels))
    return Forest(trees=trees, n_features=features.shape[1], config=config)


def predict_forest(model, features):
    """
    Majority vote over the trees.

    Returns:
        (labels [N], frequencies [N, 3]); ties go to the lowest class index
        (Blank < Human < Robot)

    Raises:
        UsageError: feature width differs from the training features
    """
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[1] != model.n_features:
        raise UsageError(f'Expected features of width {model.n_features}, got shape {features.shape}')
    votes = np.zeros((len(features), NUM_CLASSES))
    for tree in model.trees:
        votes[np.arange(len(features)), tree.predict(features)] += 1
    frequencies = votes / len(model.trees)
    return frequencies.argmax(axis=1), frequencies
