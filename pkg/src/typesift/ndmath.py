"""Dense-network math shared by the three networks.

Everything is float64 numpy. A layer holds its weight matrix (out x in,
row-major), bias vector, activation name, and a dropout rate applied to its
output during training. Networks are plain layer lists; ``forward`` records
the full activation trace so ``backward`` can produce exact reverse-mode
gradients without a general autograd graph.

All randomness in the package flows through numpy ``Generator`` objects
seeded with PCG64; one seed reproduces a run bit for bit.
"""

import hashlib
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import DimensionMismatchError

ACTIVATIONS = ("relu", "sigmoid", "softmax", "linear")


def make_rng(seed):
    """Project-wide deterministic generator (PCG64)."""
    return np.random.Generator(np.random.PCG64(seed))


def derive_seed(master_seed, *parts):
    """Stable 64-bit sub-seed from a master seed and context tokens.

    sha256 over the decimal renderings, first 8 digest bytes little-endian.
    Used wherever an independent stream is needed (sweep cells, supervised
    selection) so published numbers are reproducible from their log line.
    """
    h = hashlib.sha256()
    h.update(str(int(master_seed)).encode())
    for p in parts:
        h.update(b"\x1f")
        h.update(str(p).encode())
    return int.from_bytes(h.digest()[:8], "little")


def relu(x):
    return np.maximum(0.0, x)


def sigmoid(z):
    """Elementwise logistic, stable for |z| up to ~700."""
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def softmax(logits):
    """Row-wise softmax with max-subtraction; works on 1-D or 2-D input."""
    z = np.asarray(logits, dtype=np.float64)
    shifted = z - z.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


_P_LO = 1e-7
_P_HI = 1.0 - 1e-7


def bce_loss(p, y):
    """Binary cross-entropy and its gradient w.r.t. p.

    Probabilities are clamped to [1e-7, 1 - 1e-7] before the logs, so the
    loss and gradient stay finite. Elementwise over arrays.
    """
    p = np.clip(np.asarray(p, dtype=np.float64), _P_LO, _P_HI)
    y = np.asarray(y, dtype=np.float64)
    loss = -(y * np.log(p) + (1.0 - y) * np.log1p(-p))
    grad = -y / p + (1.0 - y) / (1.0 - p)
    return loss, grad


def cce_loss(probs, labels):
    """Categorical cross-entropy and its gradient w.r.t. the logits.

    ``probs`` must come from a softmax; the logit gradient is then simply
    probs - one_hot(label). Accepts a single (C,) vector with an int label
    or a (B, C) batch with a (B,) label array.
    """
    probs = np.asarray(probs, dtype=np.float64)
    single = probs.ndim == 1
    if single:
        probs = probs[np.newaxis, :]
        labels = np.asarray([labels])
    else:
        labels = np.asarray(labels)
    if labels.min() < 0 or labels.max() >= probs.shape[1]:
        raise IndexError("class label out of range")
    picked = np.clip(probs[np.arange(len(labels)), labels], _P_LO, _P_HI)
    loss = -np.log(picked)
    grad = probs.copy()
    grad[np.arange(len(labels)), labels] -= 1.0
    if single:
        return float(loss[0]), grad[0]
    return loss, grad


@dataclass
class DenseLayer:
    weights: np.ndarray          # (out, in)
    biases: np.ndarray           # (out,)
    activation: str
    dropout_rate: float = 0.0

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must lie in [0, 1)")

    @property
    def n_in(self):
        return self.weights.shape[1]

    @property
    def n_out(self):
        return self.weights.shape[0]

    def copy(self):
        return DenseLayer(self.weights.copy(), self.biases.copy(),
                          self.activation, self.dropout_rate)


def init_layer(rng, n_in, n_out, activation, dropout_rate=0.0):
    """He-uniform init for relu layers, Glorot-uniform otherwise; zero biases."""
    if activation == "relu":
        limit = np.sqrt(6.0 / n_in)
    else:
        limit = np.sqrt(6.0 / (n_in + n_out))
    w = rng.uniform(-limit, limit, size=(n_out, n_in))
    return DenseLayer(w, np.zeros(n_out), activation, dropout_rate)


@dataclass
class DenseNet:
    layers: list
    training: bool = False

    def __post_init__(self):
        for a, b in zip(self.layers, self.layers[1:]):
            if a.n_out != b.n_in:
                raise DimensionMismatchError(
                    f"layer chain breaks: {a.n_out} out feeds {b.n_in} in")
        for layer in self.layers[:-1]:
            if layer.activation == "softmax":
                raise ValueError("softmax is only permitted on the output layer")

    @property
    def n_in(self):
        return self.layers[0].n_in

    @property
    def n_out(self):
        return self.layers[-1].n_out

    def parameter_count(self):
        return sum(l.n_out * l.n_in + l.n_out for l in self.layers)

    def parameters(self):
        """Flat parameter list, layer-major, weights before biases."""
        out = []
        for l in self.layers:
            out.append(l.weights)
            out.append(l.biases)
        return out

    def copy(self, training=None):
        return DenseNet([l.copy() for l in self.layers],
                        self.training if training is None else training)


@dataclass
class ForwardTrace:
    """Per-layer records from one forward pass (all 2-D, batch-first)."""
    x: np.ndarray                # input as fed, (B, n_in)
    inputs: list = field(default_factory=list)   # what each layer consumed
    pre: list = field(default_factory=list)      # affine outputs z
    act: list = field(default_factory=list)      # activation(z)
    post: list = field(default_factory=list)     # after dropout scaling
    masks: list = field(default_factory=list)    # scale masks or None

    @property
    def output(self):
        return self.post[-1]


def _apply_activation(name, z):
    if name == "relu":
        return relu(z)
    if name == "sigmoid":
        return sigmoid(z)
    if name == "softmax":
        return softmax(z)
    return z


def forward(net, x, rng=None):
    """Run the network, recording every layer's pre/post activations.

    In training mode, layers with a dropout rate draw a keep mask from
    ``rng`` and scale kept units by 1/(1-rate) (inverted dropout), so
    inference applies no correction. Inference mode is a pure function of
    (net, x).
    """
    a = np.asarray(x, dtype=np.float64)
    if a.ndim == 1:
        a = a[np.newaxis, :]
    if a.shape[1] != net.n_in:
        raise DimensionMismatchError(
            f"input has {a.shape[1]} features, network expects {net.n_in}")
    trace = ForwardTrace(x=a)
    for layer in net.layers:
        trace.inputs.append(a)
        z = a @ layer.weights.T + layer.biases
        act = _apply_activation(layer.activation, z)
        if net.training and layer.dropout_rate > 0.0:
            if rng is None:
                raise ValueError("training-mode forward with dropout needs an rng")
            keep = rng.random(act.shape) >= layer.dropout_rate
            mask = keep.astype(np.float64) / (1.0 - layer.dropout_rate)
            post = act * mask
        else:
            mask = None
            post = act
        trace.pre.append(z)
        trace.act.append(act)
        trace.post.append(post)
        trace.masks.append(mask)
        a = post
    return trace


def backward(net, trace, loss_grad):
    """Exact reverse-mode gradients for every weight and bias.

    ``loss_grad`` is dL/d(output) for the traced batch, including any 1/B
    factor the caller wants; dropout masks recorded in the trace are reused.
    Returns (per-layer [(dW, db), ...], dL/d(input)).
    """
    if len(trace.pre) != len(net.layers):
        raise DimensionMismatchError("trace does not match network depth")
    g = np.asarray(loss_grad, dtype=np.float64)
    if g.ndim == 1:
        g = g[np.newaxis, :]
    if g.shape != trace.post[-1].shape:
        raise DimensionMismatchError("loss gradient shape does not match output")
    grads = [None] * len(net.layers)
    for k in range(len(net.layers) - 1, -1, -1):
        layer = net.layers[k]
        if trace.pre[k].shape[1] != layer.n_out:
            raise DimensionMismatchError("trace does not match network shapes")
        if trace.masks[k] is not None:
            g = g * trace.masks[k]
        if layer.activation == "relu":
            dz = g * (trace.pre[k] > 0)
        elif layer.activation == "sigmoid":
            s = trace.act[k]
            dz = g * s * (1.0 - s)
        elif layer.activation == "softmax":
            p = trace.act[k]
            dz = p * (g - (g * p).sum(axis=1, keepdims=True))
        else:
            dz = g
        grads[k] = (dz.T @ trace.inputs[k], dz.sum(axis=0))
        g = dz @ layer.weights
    return grads, g


@dataclass
class AdamState:
    """First/second moment accumulators for one parameter list."""
    m: list
    v: list
    t: int
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    @classmethod
    def for_params(cls, params, lr, beta1=0.9, beta2=0.999, epsilon=1e-8):
        return cls(m=[np.zeros_like(p) for p in params],
                   v=[np.zeros_like(p) for p in params],
                   t=0, lr=lr, beta1=beta1, beta2=beta2, epsilon=epsilon)


def adam_step(params, grads, state):
    """One Adam update over matching parameter/gradient lists, in place.

    The step counter increments before bias correction (first call uses
    t=1). Returns (params, state) for convenience.
    """
    if len(params) != len(grads) or len(params) != len(state.m):
        raise DimensionMismatchError("parameter/gradient/state lengths differ")
    state.t += 1
    c1 = 1.0 - state.beta1 ** state.t
    c2 = 1.0 - state.beta2 ** state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape:
            raise DimensionMismatchError("gradient shape does not match parameter")
        if not p.flags.c_contiguous:
            raise ValueError("parameters must be C-contiguous for in-place updates")
        kernels.adam_update(p.reshape(-1), np.ascontiguousarray(g).reshape(-1),
                            m.reshape(-1), v.reshape(-1),
                            c1, c2, state.lr, state.beta1, state.beta2,
                            state.epsilon)
    return params, state
