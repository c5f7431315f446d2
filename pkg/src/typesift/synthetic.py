"""Synthetic byte-histogram corpora for tests and corpus-free evaluation.

Each synthetic class is a two-component Dirichlet mixture over the 256
bins. A component's mean profile is a smooth bump at a class-specific
position on the byte axis blended with a uniform floor; scaling the profile
by a concentration parameter gives the Dirichlet alphas, so every sampled
histogram is a noisy draw around the class profile that still sums to 1
exactly. Classes overlap enough to be non-trivial but remain learnable.

Two forms are provided: ready-made feature datasets (histograms sampled
directly) and on-disk corpora whose files contain bytes drawn from the
sampled distributions, for exercising ingestion and header perturbation.
"""

import os

import numpy as np

from .corpus import Dataset
from .features import N_BINS
from .ndmath import make_rng

DEFAULT_CLASSES = ("arc", "cfg", "dmp", "img", "log")
_COMPONENT_OFFSETS = (0.0, 118.0)
_CLASS_SPACING = 17.0
_BUMP_WIDTH = 17.0
_UNIFORM_FLOOR = 0.2
_CONCENTRATION = 45.0


def _component_profile(center):
    bins = np.arange(N_BINS, dtype=np.float64)
    bump = np.exp(-0.5 * ((bins - center) / _BUMP_WIDTH) ** 2)
    bump /= bump.sum()
    return _UNIFORM_FLOOR / N_BINS + (1.0 - _UNIFORM_FLOOR) * bump


def class_alphas(class_index):
    """Dirichlet alpha vectors for the two components of one class."""
    out = []
    for offset in _COMPONENT_OFFSETS:
        center = 24.0 + offset + _CLASS_SPACING * class_index
        out.append(_component_profile(center % N_BINS) * _CONCENTRATION)
    return out


def sample_histograms(rng, class_index, n):
    """Draw n histograms from one class's mixture (components equally
    likely)."""
    alphas = class_alphas(class_index)
    comp = rng.integers(len(alphas), size=n)
    out = np.empty((n, N_BINS), dtype=np.float64)
    for i in range(n):
        out[i] = rng.dirichlet(alphas[comp[i]])
    return out


def make_histogram_dataset(n_samples=2000, seed=0, class_names=DEFAULT_CLASSES):
    """Balanced synthetic Dataset of sampled histograms (no files)."""
    rng = make_rng(seed)
    n_classes = len(class_names)
    per = [n_samples // n_classes] * n_classes
    for i in range(n_samples - sum(per)):
        per[i] += 1
    feats, labels, paths, exts = [], [], [], []
    for c, name in enumerate(class_names):
        feats.append(sample_histograms(rng, c, per[c]))
        labels.extend([c] * per[c])
        paths.extend(f"synthetic/{name}/{i:05d}.{name}" for i in range(per[c]))
        exts.extend([name] * per[c])
    return Dataset(np.vstack(feats), np.array(labels, dtype=np.int64),
                   paths, exts, list(class_names))


def write_synthetic_corpus(root, class_names=DEFAULT_CLASSES, n_per_class=25,
                           seed=0, length_range=(600, 2400)):
    """Write a small on-disk corpus of synthetic files.

    Each file's bytes are i.i.d. draws from a histogram sampled from its
    class mixture, so ingesting the corpus reproduces the same kind of
    feature vectors the histogram dataset yields.
    """
    rng = make_rng(seed)
    os.makedirs(root, exist_ok=True)
    paths = []
    for c, name in enumerate(class_names):
        hists = sample_histograms(rng, c, n_per_class)
        for i in range(n_per_class):
            length = int(rng.integers(length_range[0], length_range[1]))
            data = rng.choice(N_BINS, size=length, p=hists[i]).astype(np.uint8)
            path = os.path.join(root, f"{name}_{i:04d}.{name}")
            with open(path, "wb") as fh:
                fh.write(data.tobytes())
            paths.append(path)
    return paths
