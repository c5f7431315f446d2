"""Accuracy/confusion evaluation, the label-budget sweep, and the
header-alteration robustness experiment.

Sweep cells are seeded independently through a documented derivation
(sha256 of master seed, budget, algorithm id, replicate index), so any
published cell can be reproduced in isolation. Multi-seed cells report the
median. Header perturbation works on in-memory copies only; source corpora
are never touched.
"""

import math
import os
import statistics
from dataclasses import dataclass, field, replace

import numpy as np

from . import baselines, features, sgan
from .corpus import Dataset, select_supervised
from .ndmath import derive_seed

EXEMPT_CLASSES = frozenset({"xml", "html", "txt"})
HEADER_BYTES = bytes([0xAA, 0xBB, 0xCC, 0xDD, 0xEE, 0xFF])

ALGORITHMS = ("sgan", "mlp", "tree",
              "knn_k1", "knn_k2", "knn_k3", "knn_k4", "knn_k5", "knn_k6")


@dataclass
class ConfusionMatrix:
    counts: np.ndarray     # (C, C) int64; row = true class, col = predicted
    class_names: list

    @property
    def total(self):
        return int(self.counts.sum())

    @property
    def accuracy(self):
        return float(np.trace(self.counts)) / self.total

    def recall(self, label):
        row = self.counts[label]
        return float(row[label]) / row.sum() if row.sum() else math.nan


def evaluate(predict_fn, dataset):
    """Accuracy and confusion matrix of ``predict_fn`` over a dataset.

    ``predict_fn`` maps an (n, 256) feature matrix to (n,) label indices.
    """
    if len(dataset) == 0:
        raise ValueError("empty evaluation set")
    pred = np.asarray(predict_fn(dataset.features), dtype=np.int64)
    c = len(dataset.class_names)
    counts = np.zeros((c, c), dtype=np.int64)
    np.add.at(counts, (dataset.labels, pred), 1)
    matrix = ConfusionMatrix(counts=counts, class_names=list(dataset.class_names))
    return matrix.accuracy, matrix


def train_algorithm(name, split, config):
    """Train one named algorithm; returns (predict_fn, history or None).

    Neural algorithms train on the split per their own schedules; kNN and
    the tree fit on the supervised subset only.
    """
    if name == "sgan":
        model = sgan.build(len(split.train.class_names), config.seed)
        classifier, history = sgan.train(model, split, config)
        return (lambda x: sgan.classify_batch(classifier, x)[0]), history
    if name == "mlp":
        classifier, history = baselines.train_mlp(split, config)
        return (lambda x: sgan.classify_batch(classifier, x)[0]), history
    if name == "tree":
        sup = split.supervised()
        tree = baselines.tree_fit(sup.features, sup.labels)
        return (lambda x: baselines.tree_predict_batch(tree, x)), None
    if name.startswith("knn_k"):
        k = int(name[len("knn_k"):])
        sup = split.supervised()
        model = baselines.knn_fit(sup.features, sup.labels, k)
        return (lambda x: baselines.knn_predict_batch(model, x)), None
    raise ValueError(f"unknown algorithm {name!r}")


@dataclass
class SweepResult:
    budgets: list
    algorithms: list
    master_seed: int
    n_replicates: int
    cell_accuracies: dict = field(default_factory=dict)  # (algo, budget) -> [acc]
    cell_seeds: dict = field(default_factory=dict)       # (algo, budget) -> [seed]

    def median(self, algo, budget):
        return statistics.median(self.cell_accuracies[(algo, budget)])


def run_sweep(split, algorithms, budgets, n_replicates, master_seed, train_config):
    """Accuracy of every algorithm at every supervised budget.

    For each (budget, replicate) the supervised subset is reselected and
    each algorithm retrained with the derived cell seed; evaluation always
    uses the split's fixed test set.
    """
    n_train = len(split.train)
    for b in budgets:
        if not 1 <= b <= n_train:
            raise ValueError(f"budget {b} outside [1, {n_train}]")
    result = SweepResult(budgets=list(budgets), algorithms=list(algorithms),
                         master_seed=master_seed, n_replicates=n_replicates)
    for budget in budgets:
        for algo in algorithms:
            accs, seeds = [], []
            for rep in range(n_replicates):
                cell_seed = derive_seed(master_seed, "cell", budget, algo, rep)
                cell_split = select_supervised(split, budget, cell_seed)
                config = replace(train_config, seed=cell_seed)
                predict_fn, _ = train_algorithm(algo, cell_split, config)
                acc, _ = evaluate(predict_fn, split.test)
                accs.append(acc)
                seeds.append(cell_seed)
            result.cell_accuracies[(algo, budget)] = accs
            result.cell_seeds[(algo, budget)] = seeds
    return result


@dataclass
class PerturbReport:
    perturbed: int = 0
    exempt: int = 0
    skipped: list = field(default_factory=list)   # (path, reason)


def _patched_histogram(path):
    raw = features.raw_histogram_file(path)
    if raw.total_bytes < 6:
        return None
    with open(path, "rb") as fh:
        head = fh.read(6)
    counts = raw.counts.copy()
    for b in head:
        counts[b] -= 1
    for b in HEADER_BYTES:
        counts[b] += 1
    return counts.astype(np.float64) / float(raw.total_bytes)


def perturb_headers(dataset, source_root):
    """Re-featurize test samples with their first six bytes overwritten.

    Classes named in EXEMPT_CLASSES pass through with bit-identical
    features. Files shorter than six bytes are reported and keep their
    original features. Returns (perturbed Dataset, PerturbReport).
    """
    out = dataset.features.copy()
    report = PerturbReport()
    for i in range(len(dataset)):
        name = dataset.class_names[dataset.labels[i]]
        if name in EXEMPT_CLASSES:
            report.exempt += 1
            continue
        path = os.path.join(source_root, dataset.paths[i])
        try:
            hist = _patched_histogram(path)
        except OSError as exc:
            report.skipped.append((dataset.paths[i], f"unreadable: {exc}"))
            continue
        if hist is None:
            report.skipped.append((dataset.paths[i], "file shorter than 6 bytes"))
            continue
        out[i] = hist
        report.perturbed += 1
    perturbed = Dataset(out, dataset.labels.copy(), list(dataset.paths),
                        list(dataset.extensions), list(dataset.class_names))
    return perturbed, report


def _fmt(x):
    if isinstance(x, float):
        return format(x, ".9g")
    return str(x)


def render_sweep_csv(sweep):
    lines = ["n_supervised," + ",".join(sweep.algorithms)]
    for budget in sweep.budgets:
        cells = [format(sweep.median(a, budget), ".6f") for a in sweep.algorithms]
        lines.append(f"{budget}," + ",".join(cells))
    return "\n".join(lines) + "\n"


def render_confusion_csv(matrix):
    names = matrix.class_names
    header = ("true_class,"
              + ",".join(f"pct_{n}" for n in names) + ","
              + ",".join(f"n_{n}" for n in names) + ",row_total")
    lines = [header]
    for i, name in enumerate(names):
        row = matrix.counts[i]
        total = int(row.sum())
        if total:
            pcts = [format(100.0 * c / total, ".4f") for c in row]
        else:
            pcts = ["0.0000"] * len(names)
        lines.append(f"{name}," + ",".join(pcts) + ","
                     + ",".join(str(int(c)) for c in row) + f",{total}")
    return "\n".join(lines) + "\n"


def render_history_csv(history):
    lines = ["epoch,j_d_real,j_d_fake,j_c,j_g,train_accuracy"]
    for r in history.records:
        lines.append(",".join([str(r.epoch), _fmt(r.j_d_real), _fmt(r.j_d_fake),
                               _fmt(r.j_c), _fmt(r.j_g),
                               format(r.train_accuracy, ".6f")]))
    return "\n".join(lines) + "\n"


def render_reports(sweep, confusions, histories, out_dir):
    """Write sweep/confusion/history CSVs (UTF-8, LF). Returns paths.

    ``confusions`` and ``histories`` map a tag to a ConfusionMatrix or
    TrainHistory; either may be empty. Rendering is deterministic, so
    re-rendering the same inputs reproduces identical bytes.
    """
    os.makedirs(out_dir, exist_ok=True)
    written = []

    def _write(name, text):
        path = os.path.join(out_dir, name)
        with open(path, "wb") as fh:
            fh.write(text.encode("utf-8"))
        written.append(path)

    if sweep is not None:
        _write("sweep.csv", render_sweep_csv(sweep))
    for tag in sorted(confusions):
        _write(f"confusion_{tag}.csv", render_confusion_csv(confusions[tag]))
    for tag in sorted(histories):
        _write(f"history_{tag}.csv", render_history_csv(histories[tag]))
    return written
