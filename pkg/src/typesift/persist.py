"""Versioned binary serialization of trained models.

Layout (all little-endian):

  magic "BSR1" | version u16 | kind u8 | class names | net descriptors |
  weights (f32, layer-major, weights then biases) |
  optimizer states (sgan_full only) | sha256 over all preceding bytes

Kinds: 1 = classifier (one network), 2 = sgan_full (trunk, discriminator
head, generator, plus the three Adam states for resumable training),
3 = knn (stored samples + k), 4 = tree (preorder node stream). Network
weights are down-cast to single precision on save; trained classifiers are
already rounded to that precision, so a round trip reproduces bit-identical
inference. kNN points and tree thresholds stay double so their loaded
predictions are exact by construction.
"""

import hashlib
import struct
from dataclasses import dataclass

import numpy as np

from .baselines import KnnModel, TreeNode
from .errors import (BadMagicError, CountMismatchError, HashMismatchError,
                     VersionUnsupportedError)
from .ndmath import AdamState, DenseLayer, DenseNet
from .sgan import OptimizerStates, SganModel

MAGIC = b"BSR1"
VERSION = 1
KIND_CLASSIFIER = 1
KIND_SGAN_FULL = 2
KIND_KNN = 3
KIND_TREE = 4

_ACT_CODE = {"relu": 0, "sigmoid": 1, "softmax": 2, "linear": 3}
_ACT_NAME = {v: k for k, v in _ACT_CODE.items()}


@dataclass
class LoadedModel:
    kind: int
    class_names: list
    classifier: DenseNet = None       # kind 1
    sgan: SganModel = None            # kind 2
    optimizer: OptimizerStates = None  # kind 2
    knn: KnnModel = None              # kind 3
    tree: TreeNode = None             # kind 4


def _pack_names(names):
    out = bytearray(struct.pack("<H", len(names)))
    for name in names:
        raw = name.encode("utf-8")
        out += struct.pack("<H", len(raw)) + raw
    return bytes(out)


def _pack_descriptors(net):
    out = bytearray(struct.pack("<H", len(net.layers)))
    for layer in net.layers:
        out += struct.pack("<IIBf", layer.n_in, layer.n_out,
                           _ACT_CODE[layer.activation], layer.dropout_rate)
    return bytes(out)


def _pack_weights(net):
    out = bytearray()
    for layer in net.layers:
        out += layer.weights.astype("<f4").tobytes()
        out += layer.biases.astype("<f4").tobytes()
    return bytes(out)


def _pack_adam(state):
    out = bytearray(struct.pack("<ddddQ", state.lr, state.beta1, state.beta2,
                                state.epsilon, state.t))
    for m in state.m:
        out += m.astype("<f4").tobytes()
    for v in state.v:
        out += v.astype("<f4").tobytes()
    return bytes(out)


def _pack_tree(node, n_classes):
    out = bytearray()
    stack = [node]
    while stack:
        cur = stack.pop()
        counts = np.zeros(n_classes, dtype=np.int64)
        counts[:cur.class_counts.shape[0]] = cur.class_counts
        if cur.is_leaf:
            out += struct.pack("<BHd", 1, cur.label, 0.0)
        else:
            out += struct.pack("<BHd", 0, cur.feature, cur.threshold)
        out += counts.astype("<i8").tobytes()
        if not cur.is_leaf:
            stack.append(cur.right)   # preorder: node, left, right
            stack.append(cur.left)
    return bytes(out)


def save(model, class_names, path, optimizer=None):
    """Write a model file.

    ``model`` may be a DenseNet classifier, an SganModel (which also needs
    its OptimizerStates so training can resume), a KnnModel, or a TreeNode.
    """
    buf = bytearray(MAGIC)
    buf += struct.pack("<H", VERSION)
    if isinstance(model, DenseNet):
        buf += struct.pack("<B", KIND_CLASSIFIER)
        buf += _pack_names(class_names)
        buf += struct.pack("<B", 1)
        buf += _pack_descriptors(model)
        buf += _pack_weights(model)
    elif isinstance(model, SganModel):
        if optimizer is None:
            raise ValueError("sgan_full checkpoints need optimizer states")
        buf += struct.pack("<B", KIND_SGAN_FULL)
        buf += _pack_names(class_names)
        nets = (model.trunk, model.disc_head, model.gen)
        buf += struct.pack("<B", len(nets))
        for net in nets:
            buf += _pack_descriptors(net)
        for net in nets:
            buf += _pack_weights(net)
        for state in (optimizer.d, optimizer.c, optimizer.g):
            buf += _pack_adam(state)
    elif isinstance(model, KnnModel):
        # stored points stay double precision: a loaded model must score
        # queries exactly like the fitted one
        buf += struct.pack("<B", KIND_KNN)
        buf += _pack_names(class_names)
        n, d = model.points.shape
        buf += struct.pack("<HII", model.k, n, d)
        buf += model.labels.astype("<i8").tobytes()
        buf += model.points.astype("<f8").tobytes()
    elif isinstance(model, TreeNode):
        buf += struct.pack("<B", KIND_TREE)
        buf += _pack_names(class_names)
        n_classes = max(len(class_names), int(model.class_counts.shape[0]))
        buf += struct.pack("<H", n_classes)
        buf += _pack_tree(model, n_classes)
    else:
        raise TypeError(f"cannot serialize {type(model).__name__}")
    digest = hashlib.sha256(bytes(buf)).digest()
    with open(path, "wb") as fh:
        fh.write(bytes(buf))
        fh.write(digest)


class _Reader:
    def __init__(self, body):
        self.body = body
        self.pos = 0

    def take(self, n):
        if self.pos + n > len(self.body):
            raise CountMismatchError("payload shorter than declared shapes")
        out = self.body[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def array(self, count, shape):
        raw = self.take(4 * count)
        return np.frombuffer(raw, dtype="<f4").astype(np.float64).reshape(shape)

    def done(self):
        if self.pos != len(self.body):
            raise CountMismatchError("trailing bytes beyond declared shapes")


def _read_names(r):
    (count,) = r.unpack("<H")
    names = []
    for _ in range(count):
        (n,) = r.unpack("<H")
        names.append(r.take(n).decode("utf-8"))
    return names


def _read_descriptors(r):
    (count,) = r.unpack("<H")
    descs = []
    for _ in range(count):
        n_in, n_out, code, rate = r.unpack("<IIBf")
        if code not in _ACT_NAME:
            raise CountMismatchError(f"unknown activation code {code}")
        descs.append((n_in, n_out, _ACT_NAME[code], float(rate)))
    return descs


def _read_net(r, descs, training=False):
    layers = []
    for n_in, n_out, act, rate in descs:
        w = r.array(n_in * n_out, (n_out, n_in))
        b = r.array(n_out, (n_out,))
        layers.append(DenseLayer(w, b, act, rate))
    return DenseNet(layers, training=training)


def _read_adam(r, params):
    lr, b1, b2, eps, t = r.unpack("<ddddQ")
    m = [r.array(p.size, p.shape) for p in params]
    v = [r.array(p.size, p.shape) for p in params]
    return AdamState(m=m, v=v, t=int(t), lr=lr, beta1=b1, beta2=b2, epsilon=eps)


def _read_tree(r, n_classes):
    """Rebuild a preorder-serialized tree without recursion."""
    root = None
    pending = [None]   # (parent, side) slots awaiting the next record
    while pending:
        slot = pending.pop()
        flag, value, threshold = r.unpack("<BHd")
        counts = np.frombuffer(r.take(8 * n_classes), dtype="<i8").astype(np.int64)
        if flag == 1:
            node = TreeNode(label=int(value), class_counts=counts)
        elif flag == 0:
            node = TreeNode(feature=int(value), threshold=float(threshold),
                            label=int(np.argmax(counts)), class_counts=counts)
        else:
            raise CountMismatchError(f"unknown tree node flag {flag}")
        if slot is None:
            root = node
        else:
            parent, side = slot
            setattr(parent, side, node)
        if flag == 0:
            pending.append((node, "right"))
            pending.append((node, "left"))
    return root


def load(path):
    """Read and verify a model file; raises BadMagicError,
    VersionUnsupportedError, HashMismatchError, or CountMismatchError."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < len(MAGIC) or raw[:len(MAGIC)] != MAGIC:
        raise BadMagicError("not a typesift model file")
    if len(raw) < len(MAGIC) + 2 + 32:
        raise HashMismatchError("file too short to hold an integrity hash")
    (version,) = struct.unpack("<H", raw[4:6])
    if version != VERSION:
        raise VersionUnsupportedError(f"format version {version} unsupported")
    body, digest = raw[:-32], raw[-32:]
    if hashlib.sha256(body).digest() != digest:
        raise HashMismatchError("integrity hash does not verify")

    r = _Reader(body)
    r.take(6)   # magic + version, already checked
    (kind,) = r.unpack("<B")
    if kind == KIND_CLASSIFIER:
        names = _read_names(r)
        (n_nets,) = r.unpack("<B")
        if n_nets != 1:
            raise CountMismatchError("classifier files hold exactly one network")
        descs = _read_descriptors(r)
        net = _read_net(r, descs)
        r.done()
        return LoadedModel(kind=kind, class_names=names, classifier=net)
    if kind == KIND_SGAN_FULL:
        names = _read_names(r)
        (n_nets,) = r.unpack("<B")
        if n_nets != 3:
            raise CountMismatchError("sgan_full files hold exactly three networks")
        descs = [_read_descriptors(r) for _ in range(3)]
        trunk, head, gen = (_read_net(r, d) for d in descs)
        model = SganModel(trunk=trunk, disc_head=head, gen=gen)
        opt = OptimizerStates(
            d=_read_adam(r, trunk.parameters() + head.parameters()),
            c=_read_adam(r, trunk.parameters()),
            g=_read_adam(r, gen.parameters()),
        )
        r.done()
        return LoadedModel(kind=kind, class_names=names, sgan=model, optimizer=opt)
    if kind == KIND_KNN:
        names = _read_names(r)
        k, n, d = r.unpack("<HII")
        labels = np.frombuffer(r.take(8 * n), dtype="<i8").astype(np.int64)
        points = np.frombuffer(r.take(8 * n * d), dtype="<f8") \
            .astype(np.float64).reshape(n, d)
        r.done()
        return LoadedModel(kind=kind, class_names=names,
                           knn=KnnModel(points=points, labels=labels, k=int(k)))
    if kind == KIND_TREE:
        names = _read_names(r)
        (n_classes,) = r.unpack("<H")
        tree = _read_tree(r, n_classes)
        r.done()
        return LoadedModel(kind=kind, class_names=names, tree=tree)
    raise CountMismatchError(f"unknown model kind {kind}")
