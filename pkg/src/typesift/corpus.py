"""Corpus ingestion, splitting, supervised-subset selection, feature cache.

Labels come from lowercased filename extensions at ingest time; the corpus
names are treated as ground truth and obfuscation is only ever simulated
downstream on in-memory copies. Extensions seen on fewer than 20 readable
files are dropped along with their samples. Directory walks are sorted, so
ingesting the same tree twice yields identical datasets.
"""

import hashlib
import os
from dataclasses import dataclass, field

import numpy as np

from . import features
from .errors import ChecksumError, EmptyFileError, FormatError
from .ndmath import make_rng

MIN_CLASS_COUNT = 20


@dataclass(frozen=True)
class LabeledSample:
    features: np.ndarray        # (256,) normalized histogram
    label: int
    source_path: str
    original_extension: str


@dataclass
class Dataset:
    """Columnar sample store; rows align across all fields."""
    features: np.ndarray        # (n, 256) float64
    labels: np.ndarray          # (n,) int64
    paths: list
    extensions: list
    class_names: list           # sorted; index = label

    def __len__(self):
        return self.features.shape[0]

    def sample(self, i):
        return LabeledSample(self.features[i], int(self.labels[i]),
                             self.paths[i], self.extensions[i])

    def subset(self, indices):
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(self.features[idx], self.labels[idx],
                       [self.paths[i] for i in idx],
                       [self.extensions[i] for i in idx],
                       list(self.class_names))


@dataclass
class IngestReport:
    removed_classes: dict = field(default_factory=dict)   # ext -> file count
    rejected_files: list = field(default_factory=list)    # (path, reason)

    def summary(self):
        lines = []
        for ext in sorted(self.removed_classes):
            lines.append(f"removed rare class .{ext}: {self.removed_classes[ext]} files")
        for path, reason in self.rejected_files:
            lines.append(f"rejected {path}: {reason}")
        return "\n".join(lines)


@dataclass
class DatasetSplit:
    train: Dataset
    test: Dataset
    supervised_indices: np.ndarray   # indices into train
    seed: int

    @property
    def n_supervised(self):
        return int(self.supervised_indices.shape[0])

    def supervised(self):
        return self.train.subset(self.supervised_indices)


def _extension(name):
    stem, dot, ext = name.rpartition(".")
    if not dot or not stem or not ext:
        return None
    return ext.lower()


def _walk_files(root):
    out = []
    for dirpath, dirnames, filenames in os.walk(root):
        dirnames.sort()
        for name in filenames:
            out.append(os.path.join(dirpath, name))
    out.sort()
    return out


def ingest(root_dir):
    """Featurize every regular file under root_dir.

    Returns (Dataset, IngestReport). Files that are empty, unreadable, or
    lack an extension are rejected into the report, as are all files of
    classes seen fewer than 20 times.
    """
    if not os.path.isdir(root_dir):
        raise OSError(f"not a directory: {root_dir}")
    report = IngestReport()
    kept = []   # (relpath, ext, features)
    for path in _walk_files(root_dir):
        rel = os.path.relpath(path, root_dir).replace(os.sep, "/")
        ext = _extension(os.path.basename(path))
        if ext is None:
            report.rejected_files.append((rel, "no extension"))
            continue
        try:
            vec = features.featurize_file(path)
        except EmptyFileError:
            report.rejected_files.append((rel, "empty file"))
            continue
        except OSError as exc:
            report.rejected_files.append((rel, f"unreadable: {exc}"))
            continue
        kept.append((rel, ext, vec))

    counts = {}
    for _, ext, _ in kept:
        counts[ext] = counts.get(ext, 0) + 1
    surviving = {ext for ext, c in counts.items() if c >= MIN_CLASS_COUNT}
    for ext, c in sorted(counts.items()):
        if ext not in surviving:
            report.removed_classes[ext] = c

    class_names = sorted(surviving)
    label_of = {ext: i for i, ext in enumerate(class_names)}
    rows = [(rel, ext, vec) for rel, ext, vec in kept if ext in surviving]
    n = len(rows)
    feats = np.zeros((n, features.N_BINS), dtype=np.float64)
    labels = np.zeros(n, dtype=np.int64)
    paths, exts = [], []
    for i, (rel, ext, vec) in enumerate(rows):
        feats[i] = vec
        labels[i] = label_of[ext]
        paths.append(rel)
        exts.append(ext)
    return Dataset(feats, labels, paths, exts, class_names), report


def shuffle_split(dataset, train_fraction=0.8, seed=0):
    """Deterministic shuffle then split; first round(f*n) samples train.

    The returned split starts fully supervised; use select_supervised to
    restrict the labeled subset.
    """
    n = len(dataset)
    if n < 2:
        raise ValueError("need at least 2 samples to split")
    perm = make_rng(seed).permutation(n)
    n_train = int(round(train_fraction * n))
    train = dataset.subset(perm[:n_train])
    test = dataset.subset(perm[n_train:])
    return DatasetSplit(train=train, test=test,
                        supervised_indices=np.arange(n_train, dtype=np.int64),
                        seed=seed)


def select_supervised(split, n, seed):
    """Stratified supervised subset of size n over the training samples.

    Each class present in train gets floor(n/C) picks where it has that
    many; the remainder is spread one sample at a time over classes chosen
    uniformly among those with leftover supply, so no class collects a
    second extra before every class has one. Deterministic in ``seed``.
    """
    n_train = len(split.train)
    if not 1 <= n <= n_train:
        raise ValueError(f"supervised budget {n} outside [1, {n_train}]")
    rng = make_rng(seed)
    labels = split.train.labels
    classes = np.unique(labels)
    quota = n // len(classes)

    chosen = []
    leftover_by_class = {}
    for c in classes:
        members = np.flatnonzero(labels == c)
        take = min(quota, members.shape[0])
        picked = rng.choice(members, size=take, replace=False) if take else np.empty(0, np.int64)
        chosen.append(picked)
        rest = np.setdiff1d(members, picked)
        if rest.size:
            leftover_by_class[int(c)] = rest
    remainder = n - sum(len(p) for p in chosen)
    while remainder > 0:
        eligible = sorted(leftover_by_class)
        take = min(remainder, len(eligible))
        if take == len(eligible):
            picked_classes = eligible
        else:
            picked_classes = list(rng.choice(eligible, size=take, replace=False))
        for c in picked_classes:
            pool = leftover_by_class[c]
            j = int(rng.integers(pool.shape[0]))
            chosen.append(pool[j:j + 1])
            leftover_by_class[c] = np.delete(pool, j)
            if leftover_by_class[c].size == 0:
                del leftover_by_class[c]
        remainder -= take

    indices = np.sort(np.concatenate(chosen).astype(np.int64))
    return DatasetSplit(train=split.train, test=split.test,
                        supervised_indices=indices, seed=split.seed)


_HEADER = "path,label,ext," + ",".join(f"b{i}" for i in range(features.N_BINS))
_SUM_TOL = 1e-4   # float32 rendering of 256 bins can drift ~1e-5 from 1.0


def save_features(dataset, path):
    """Write the feature cache CSV.

    One row per sample, floats rendered from single precision with 9
    significant digits (enough for a lossless float32 round trip), then a
    trailing ``#sha256:`` line over all preceding bytes.
    """
    lines = [_HEADER]
    for i in range(len(dataset)):
        path_cell = dataset.paths[i]
        if "," in path_cell or "\n" in path_cell or "\r" in path_cell:
            raise FormatError(f"path {path_cell!r} cannot be stored: the cache "
                              f"format has no quoting for commas or newlines")
        bins = dataset.features[i].astype(np.float32)
        cells = [path_cell, str(int(dataset.labels[i])), dataset.extensions[i]]
        cells.extend(format(float(b), ".9g") for b in bins)
        lines.append(",".join(cells))
    body = ("\n".join(lines) + "\n").encode("utf-8")
    digest = hashlib.sha256(body).hexdigest()
    with open(path, "wb") as fh:
        fh.write(body)
        fh.write(f"#sha256:{digest}\n".encode("utf-8"))


def load_features(path):
    """Read a feature cache written by save_features.

    Validates the trailing checksum, the column arity, per-row sum-to-1,
    and label/extension consistency. Returns a Dataset whose class_names
    cover the label indices seen in the file.
    """
    with open(path, "rb") as fh:
        raw = fh.read()
    text = raw.decode("utf-8")
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise FormatError("empty cache file")
    trailer = lines[-1]
    if not trailer.startswith("#sha256:"):
        raise ChecksumError("missing #sha256 trailer")
    body = ("\n".join(lines[:-1]) + "\n").encode("utf-8")
    expect = trailer[len("#sha256:"):]
    actual = hashlib.sha256(body).hexdigest()
    if actual != expect:
        raise ChecksumError("cache checksum does not match contents")
    if lines[0] != _HEADER:
        raise FormatError("unexpected header row", line=1)

    rows = lines[1:-1]
    n = len(rows)
    feats = np.zeros((n, features.N_BINS), dtype=np.float64)
    labels = np.zeros(n, dtype=np.int64)
    paths, exts = [], []
    name_of = {}
    for i, row in enumerate(rows):
        lineno = i + 2
        cells = row.split(",")
        if len(cells) != 3 + features.N_BINS:
            raise FormatError(f"expected {3 + features.N_BINS} columns, got {len(cells)}",
                              line=lineno)
        try:
            label = int(cells[1])
            bins = np.array(cells[3:], dtype=np.float32)
        except ValueError as exc:
            raise FormatError(str(exc), line=lineno) from None
        if label < 0:
            raise FormatError("negative label", line=lineno)
        if not np.isfinite(bins).all() or (bins < 0).any():
            raise FormatError("bins must be finite and non-negative", line=lineno)
        s = float(np.cumsum(bins.astype(np.float64))[-1])
        if abs(s - 1.0) > _SUM_TOL:
            raise FormatError(f"bins sum to {s:.6f}, not 1", line=lineno)
        ext = cells[2]
        if name_of.setdefault(label, ext) != ext:
            raise FormatError(f"label {label} maps to both "
                              f"{name_of[label]!r} and {ext!r}", line=lineno)
        feats[i] = bins.astype(np.float64)
        labels[i] = label
        paths.append(cells[0])
        exts.append(ext)

    n_classes = (max(name_of) + 1) if name_of else 0
    class_names = [name_of.get(i, f"class{i}") for i in range(n_classes)]
    return Dataset(feats, labels, paths, exts, class_names)
