"""Comparison classifiers: standalone MLP, k-nearest neighbors, CART tree.

The MLP reuses the adversarial classifier's architecture but trains purely
supervised on the labeled subset. kNN and the tree are exact, deterministic
implementations with fixed tie-break rules so brute-force oracles can check
them bit for bit.
"""

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import kernels
from .errors import EmptySupervisedSetError
from .ndmath import DenseNet, backward, cce_loss, derive_seed, forward, \
    init_layer, make_rng, softmax, AdamState, adam_step
from .sgan import (DROPOUT, INPUT_DIM, TRUNK_HIDDEN, EpochRecord,
                   TrainHistory, _Cycler, _flat, classifier_from_trunk,
                   train_set_accuracy)


def build_mlp(n_classes, seed, input_dim=INPUT_DIM):
    """Supervised network with the same shape as the adversarial trunk
    (304,779 parameters for 256 inputs and 11 classes)."""
    rng = make_rng(derive_seed(seed, "build"))
    layers = []
    fan_in = input_dim
    for width in TRUNK_HIDDEN:
        layers.append(init_layer(rng, fan_in, width, "relu", DROPOUT))
        fan_in = width
    layers.append(init_layer(rng, fan_in, n_classes, "linear"))
    return DenseNet(layers)


def train_mlp(split, config, net=None):
    """Train the standalone MLP on the supervised subset only.

    Batch size, epoch cap, optimizer, and best-by-train-accuracy
    snapshotting mirror the adversarial training loop; an epoch here is
    one pass over the supervised subset. Returns (classifier, history).
    """
    if split.n_supervised == 0:
        raise EmptySupervisedSetError("no supervised samples selected")
    if net is None:
        net = build_mlp(len(split.train.class_names), config.seed)
    rng = make_rng(derive_seed(config.seed, "train"))
    net.training = True
    opt = AdamState.for_params(net.parameters(), config.lr_dc)
    cycler = _Cycler(split.supervised_indices, rng)
    n_batches = max(1, math.ceil(split.n_supervised / config.batch_size))
    history = TrainHistory()
    best = net.copy(training=False)
    best_acc = -1.0
    try:
        for epoch in range(1, config.max_epochs + 1):
            loss_sum = 0.0
            for _ in range(n_batches):
                idx = cycler.take(config.batch_size)
                x = split.train.features[idx]
                y = split.train.labels[idx]
                trace = forward(net, x, rng)
                probs = softmax(trace.output)
                losses, dlogits = cce_loss(probs, y)
                grads, _ = backward(net, trace, dlogits / x.shape[0])
                adam_step(net.parameters(), _flat(grads), opt)
                loss_sum += float(losses.mean())
            acc = train_set_accuracy(net, split)
            history.records.append(EpochRecord(
                epoch=epoch, j_d_real=math.nan, j_d_fake=math.nan,
                j_c=loss_sum / n_batches, j_g=math.nan, train_accuracy=acc))
            if acc > best_acc:
                best_acc = acc
                best = net.copy(training=False)
                history.best_epoch = epoch
            if best_acc >= 1.0:
                break
    finally:
        net.training = False
    return classifier_from_trunk(best), history


@dataclass
class KnnModel:
    points: np.ndarray    # (n, 256) stored training histograms
    labels: np.ndarray    # (n,)
    k: int

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be at least 1")
        if self.points.shape[0] == 0:
            raise ValueError("stored set must be non-empty")


def knn_fit(points, labels, k):
    return KnnModel(np.ascontiguousarray(points, dtype=np.float64),
                    np.asarray(labels, dtype=np.int64), int(k))


def _vote(labels_k, dists_k):
    counts = np.bincount(labels_k)
    best = counts.max()
    cands = np.flatnonzero(counts == best)
    if cands.shape[0] == 1:
        return int(cands[0])
    sums = np.array([dists_k[labels_k == c].sum() for c in cands])
    # argmin keeps the first (lowest class index) on exact distance ties
    return int(cands[np.argmin(sums)])


def knn_predict_batch(model, queries):
    """Majority label among the k nearest stored points, per query.

    Distance ties are broken by storage order; vote ties by the smaller
    summed distance, then the lower class index. Queries beyond the stored
    count use all stored points.
    """
    q = np.ascontiguousarray(np.atleast_2d(queries), dtype=np.float64)
    dists = kernels.sq_dists(q, model.points)
    k = min(model.k, model.points.shape[0])
    out = np.empty(q.shape[0], dtype=np.int64)
    for i in range(q.shape[0]):
        order = np.argsort(dists[i], kind="stable")[:k]
        out[i] = _vote(model.labels[order], dists[i][order])
    return out


def knn_predict(model, histogram):
    return int(knn_predict_batch(model, histogram)[0])


def knn_predict_proba(model, queries, n_classes):
    """Labels (standard tie-breaks) plus per-class vote fractions among the k
    nearest; on vote ties the label need not be the proba argmax."""
    q = np.ascontiguousarray(np.atleast_2d(queries), dtype=np.float64)
    dists = kernels.sq_dists(q, model.points)
    k = min(model.k, model.points.shape[0])
    labels = np.empty(q.shape[0], dtype=np.int64)
    probs = np.zeros((q.shape[0], n_classes), dtype=np.float64)
    for i in range(q.shape[0]):
        order = np.argsort(dists[i], kind="stable")[:k]
        labels[i] = _vote(model.labels[order], dists[i][order])
        probs[i] = np.bincount(model.labels[order], minlength=n_classes) / k
    return labels, probs


@dataclass
class TreeNode:
    """Internal node (feature/threshold/children) or leaf (label/counts)."""
    feature: int = -1
    threshold: float = 0.0
    left: Optional["TreeNode"] = None
    right: Optional["TreeNode"] = None
    label: int = -1
    class_counts: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int64))

    @property
    def is_leaf(self):
        return self.left is None


def _best_split(x, y, idx, n_classes):
    best_gain = 0.0
    best_feature = -1
    best_pos = -1
    for f in range(x.shape[1]):
        vals = x[idx, f]
        order = np.argsort(vals, kind="stable")
        gain, pos = kernels.split_scan(np.ascontiguousarray(vals[order]),
                                       np.ascontiguousarray(y[idx][order]),
                                       n_classes)
        if gain > best_gain:
            best_gain, best_feature, best_pos = gain, f, pos
    return best_gain, best_feature, best_pos


def tree_fit(points, labels):
    """Grow an unpruned CART tree by Gini impurity decrease.

    Thresholds are midpoints between adjacent distinct sorted values;
    samples with feature <= threshold go left. A node becomes a leaf when
    pure, smaller than 2 samples, or when no split improves impurity.
    """
    x = np.asarray(points, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if x.shape[0] == 0:
        raise ValueError("cannot fit a tree on zero samples")
    n_classes = int(y.max()) + 1
    root = TreeNode()
    stack = [(np.arange(x.shape[0]), root)]
    while stack:
        idx, node = stack.pop()
        counts = np.bincount(y[idx], minlength=n_classes).astype(np.int64)
        node.class_counts = counts
        node.label = int(np.argmax(counts))
        if idx.shape[0] < 2 or counts.max() == idx.shape[0]:
            continue
        gain, feature, pos = _best_split(x, y, idx, n_classes)
        if feature < 0:
            continue
        vals = x[idx, feature]
        order = np.argsort(vals, kind="stable")
        sv = vals[order]
        threshold = (sv[pos] + sv[pos + 1]) / 2.0
        if threshold >= sv[pos + 1]:   # midpoint rounded up to the right value
            threshold = sv[pos]
        node.feature = feature
        node.threshold = float(threshold)
        left_mask = vals <= threshold
        node.left = TreeNode()
        node.right = TreeNode()
        stack.append((idx[left_mask], node.left))
        stack.append((idx[~left_mask], node.right))
    return root


def tree_predict(tree, histogram):
    x = np.asarray(histogram, dtype=np.float64)
    node = tree
    while not node.is_leaf:
        node = node.left if x[node.feature] <= node.threshold else node.right
    return node.label


def tree_predict_batch(tree, queries):
    q = np.atleast_2d(np.asarray(queries, dtype=np.float64))
    return np.array([tree_predict(tree, q[i]) for i in range(q.shape[0])],
                    dtype=np.int64)


def _leaf_for(tree, x):
    node = tree
    while not node.is_leaf:
        node = node.left if x[node.feature] <= node.threshold else node.right
    return node


def tree_predict_proba(tree, queries, n_classes):
    """Labels plus the reached leaf's class histogram as probabilities."""
    q = np.atleast_2d(np.asarray(queries, dtype=np.float64))
    labels = np.empty(q.shape[0], dtype=np.int64)
    probs = np.zeros((q.shape[0], n_classes), dtype=np.float64)
    for i in range(q.shape[0]):
        leaf = _leaf_for(tree, q[i])
        labels[i] = leaf.label
        counts = np.zeros(n_classes, dtype=np.float64)
        counts[:leaf.class_counts.shape[0]] = leaf.class_counts
        probs[i] = counts / counts.sum()
    return labels, probs
