"""Adversarially-trained file-type classifier.

Three networks: a generator mapping latent noise to fake 256-bin histogram
vectors, and a shared trunk whose 11 logits feed two heads - a single
sigmoid unit scoring real vs. generated, and a softmax over the logits for
class prediction. The trunk is updated by both the discrimination and the
classification losses, so unlabeled samples shape the classifier.

Per batch, three steps run in a fixed order:
  (a) discriminator: half real samples (labeled or not) against half
      generated, binary cross-entropy, one Adam step on trunk + head;
  (b) classifier: one full batch cycled from the supervised subset,
      categorical cross-entropy, one Adam step on the trunk;
  (c) generator: fresh latents scored by the frozen trunk + head with the
      non-saturating loss (targets 1.0), one Adam step on the generator.

The returned classifier is the trunk snapshot with the best accuracy on
the full training set (earliest epoch on ties), softmax on its logits.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptySupervisedSetError
from .ndmath import (AdamState, DenseLayer, DenseNet, adam_step, backward,
                     bce_loss, cce_loss, derive_seed, forward, init_layer,
                     make_rng, softmax)

TRUNK_HIDDEN = (512, 256, 128, 64)
GEN_HIDDEN = (32, 64, 128)
GEN_PENULTIMATE = 256
DROPOUT = 0.3
INPUT_DIM = 256
LATENT_DIM = 100


@dataclass
class SganModel:
    trunk: DenseNet       # input -> hidden stack -> class logits (linear)
    disc_head: DenseNet   # logits -> 1, sigmoid
    gen: DenseNet         # latent -> fake histogram vector, sigmoid

    @property
    def n_classes(self):
        return self.trunk.n_out

    def parameter_counts(self):
        return (self.trunk.parameter_count(),
                self.disc_head.parameter_count(),
                self.gen.parameter_count())

    def set_training(self, flag):
        self.trunk.training = flag
        self.disc_head.training = flag
        self.gen.training = flag


@dataclass
class TrainConfig:
    batch_size: int = 32
    max_epochs: int = 300
    lr_dc: float = 0.0005
    lr_g: float = 0.0005
    latent_dim: int = LATENT_DIM
    seed: int = 42

    def __post_init__(self):
        if self.batch_size < 2 or self.batch_size % 2 != 0:
            raise ValueError("batch_size must be even and at least 2")
        if self.latent_dim < 1:
            raise ValueError("latent_dim must be positive")


@dataclass
class EpochRecord:
    epoch: int
    j_d_real: float
    j_d_fake: float
    j_c: float
    j_g: float
    train_accuracy: float


@dataclass
class TrainHistory:
    records: list = field(default_factory=list)
    best_epoch: int = 0   # 0 means the initial weights were never beaten


@dataclass
class OptimizerStates:
    d: AdamState    # trunk + disc_head parameters, in that order
    c: AdamState    # trunk parameters
    g: AdamState    # generator parameters

    @classmethod
    def for_model(cls, model, config):
        return cls(
            d=AdamState.for_params(model.trunk.parameters()
                                   + model.disc_head.parameters(), config.lr_dc),
            c=AdamState.for_params(model.trunk.parameters(), config.lr_dc),
            g=AdamState.for_params(model.gen.parameters(), config.lr_g),
        )


def build(n_classes, seed, input_dim=INPUT_DIM, latent_dim=LATENT_DIM):
    """Construct the three networks with seeded initial weights.

    For the 256-input, 11-class architecture the parameter counts are
    pinned: 304,779 (trunk) + 12 (head) + 112,480 (generator) = 417,271.
    """
    rng = make_rng(derive_seed(seed, "build"))
    trunk_layers = []
    fan_in = input_dim
    for width in TRUNK_HIDDEN:
        trunk_layers.append(init_layer(rng, fan_in, width, "relu", DROPOUT))
        fan_in = width
    trunk_layers.append(init_layer(rng, fan_in, n_classes, "linear"))
    trunk = DenseNet(trunk_layers)

    disc_head = DenseNet([init_layer(rng, n_classes, 1, "sigmoid")])

    gen_layers = []
    fan_in = latent_dim
    for width in GEN_HIDDEN:
        gen_layers.append(init_layer(rng, fan_in, width, "relu", DROPOUT))
        fan_in = width
    gen_layers.append(init_layer(rng, fan_in, GEN_PENULTIMATE, "relu"))
    gen_layers.append(init_layer(rng, GEN_PENULTIMATE, input_dim, "sigmoid"))
    gen = DenseNet(gen_layers)

    return SganModel(trunk=trunk, disc_head=disc_head, gen=gen)


def sample_latent(rng, batch, latent_dim=LATENT_DIM):
    """Batch of i.i.d. standard-normal latent vectors."""
    return rng.standard_normal((batch, latent_dim))


class _Cycler:
    """Endless shuffled index stream; reshuffles whenever it runs dry."""

    def __init__(self, indices, rng):
        self._indices = np.asarray(indices, dtype=np.int64)
        self._rng = rng
        self._order = self._rng.permutation(self._indices)
        self._pos = 0

    def take(self, k):
        out = np.empty(k, dtype=np.int64)
        filled = 0
        while filled < k:
            if self._pos == self._order.shape[0]:
                self._order = self._rng.permutation(self._indices)
                self._pos = 0
            grab = min(k - filled, self._order.shape[0] - self._pos)
            out[filled:filled + grab] = self._order[self._pos:self._pos + grab]
            self._pos += grab
            filled += grab
        return out


@dataclass
class _Streams:
    real: _Cycler
    sup: _Cycler


def _flat(layer_grads):
    out = []
    for dw, db in layer_grads:
        out.append(dw)
        out.append(db)
    return out


def _d_step(model, opt, x_real, rng, config):
    """Discrimination step on half real / half generated; returns the two
    mean BCE losses (real, fake)."""
    half = x_real.shape[0]
    z = sample_latent(rng, half, config.latent_dim)
    fakes = forward(model.gen, z, rng).output
    x = np.vstack([x_real, fakes])
    targets = np.concatenate([np.ones(half), np.zeros(half)])[:, np.newaxis]

    trunk_trace = forward(model.trunk, x, rng)
    head_trace = forward(model.disc_head, trunk_trace.output, rng)
    losses, dldp = bce_loss(head_trace.output, targets)
    grad = dldp / x.shape[0]
    head_grads, g_in = backward(model.disc_head, head_trace, grad)
    trunk_grads, _ = backward(model.trunk, trunk_trace, g_in)
    adam_step(model.trunk.parameters() + model.disc_head.parameters(),
              _flat(trunk_grads) + _flat(head_grads), opt.d)
    return float(losses[:half].mean()), float(losses[half:].mean())


def _c_step(model, opt, x_sup, y_sup, rng):
    """Supervised classification step; returns the mean cross-entropy."""
    trace = forward(model.trunk, x_sup, rng)
    probs = softmax(trace.output)
    losses, dlogits = cce_loss(probs, y_sup)
    grads, _ = backward(model.trunk, trace, dlogits / x_sup.shape[0])
    adam_step(model.trunk.parameters(), _flat(grads), opt.c)
    return float(losses.mean())


def _g_step(model, opt, rng, config):
    """Generator step with the non-saturating loss; trunk and head receive
    gradients but no update."""
    z = sample_latent(rng, config.batch_size, config.latent_dim)
    gen_trace = forward(model.gen, z, rng)
    trunk_trace = forward(model.trunk, gen_trace.output, rng)
    head_trace = forward(model.disc_head, trunk_trace.output, rng)
    targets = np.ones((config.batch_size, 1))
    losses, dldp = bce_loss(head_trace.output, targets)
    grad = dldp / config.batch_size
    _, g_head = backward(model.disc_head, head_trace, grad)
    _, g_trunk = backward(model.trunk, trunk_trace, g_head)
    gen_grads, _ = backward(model.gen, gen_trace, g_trunk)
    adam_step(model.gen.parameters(), _flat(gen_grads), opt.g)
    return float(losses.mean())


def train_set_accuracy(trunk, split):
    """Classification accuracy over the full training set, inference mode."""
    was_training = trunk.training
    trunk.training = False
    logits = forward(trunk, split.train.features).output
    trunk.training = was_training
    pred = np.argmax(logits, axis=1)
    return float((pred == split.train.labels).mean())


def train_epoch(model, split, config, rng, opt, streams=None, epoch=1):
    """One epoch: ceil(n_train / batch_size) batches of the three-step
    schedule, then a full-training-set accuracy evaluation."""
    if split.n_supervised == 0:
        raise EmptySupervisedSetError("no supervised samples selected")
    if streams is None:
        streams = _Streams(real=_Cycler(np.arange(len(split.train)), rng),
                           sup=_Cycler(split.supervised_indices, rng))
    half = config.batch_size // 2
    n_batches = max(1, math.ceil(len(split.train) / config.batch_size))
    sums = np.zeros(4)
    for _ in range(n_batches):
        real_idx = streams.real.take(half)
        j_real, j_fake = _d_step(model, opt, split.train.features[real_idx],
                                 rng, config)
        sup_idx = streams.sup.take(config.batch_size)
        j_c = _c_step(model, opt, split.train.features[sup_idx],
                      split.train.labels[sup_idx], rng)
        j_g = _g_step(model, opt, rng, config)
        sums += (j_real, j_fake, j_c, j_g)
    means = sums / n_batches
    return EpochRecord(epoch=epoch,
                       j_d_real=float(means[0]), j_d_fake=float(means[1]),
                       j_c=float(means[2]), j_g=float(means[3]),
                       train_accuracy=train_set_accuracy(model.trunk, split))


def classifier_from_trunk(trunk):
    """Inference copy of the trunk with softmax over its logits, weights
    rounded to the serialized (single) precision so a save/load round trip
    is exact."""
    net = trunk.copy(training=False)
    last = net.layers[-1]
    net.layers[-1] = DenseLayer(last.weights, last.biases, "softmax",
                                last.dropout_rate)
    for layer in net.layers:
        layer.weights[:] = layer.weights.astype(np.float32)
        layer.biases[:] = layer.biases.astype(np.float32)
    return net


def train(model, split, config):
    """Run up to config.max_epochs epochs and return the best classifier.

    The trunk is snapshotted whenever training-set accuracy strictly
    improves; ties keep the earliest epoch. Training halts early once that
    accuracy reaches 1.0, since no later snapshot could replace it.
    """
    if split.n_supervised == 0:
        raise EmptySupervisedSetError("no supervised samples selected")
    rng = make_rng(derive_seed(config.seed, "train"))
    model.set_training(True)
    opt = OptimizerStates.for_model(model, config)
    streams = _Streams(real=_Cycler(np.arange(len(split.train)), rng),
                       sup=_Cycler(split.supervised_indices, rng))
    history = TrainHistory()
    best_trunk = model.trunk.copy(training=False)
    best_acc = -1.0
    try:
        for epoch in range(1, config.max_epochs + 1):
            rec = train_epoch(model, split, config, rng, opt, streams, epoch)
            history.records.append(rec)
            if rec.train_accuracy > best_acc:
                best_acc = rec.train_accuracy
                best_trunk = model.trunk.copy(training=False)
                history.best_epoch = epoch
            if best_acc >= 1.0:
                break
    finally:
        model.set_training(False)
    return classifier_from_trunk(best_trunk), history


def classify(classifier, histogram):
    """Predicted label and class probabilities for one histogram."""
    probs = forward(classifier, np.asarray(histogram, dtype=np.float64)).output[0]
    return int(np.argmax(probs)), probs


def classify_batch(classifier, feature_matrix):
    probs = forward(classifier, feature_matrix).output
    return np.argmax(probs, axis=1), probs
