"""Command-line interface for forensic batch use.

Subcommands: ingest, train, evaluate, classify, sweep. Every run is
deterministic under fixed flags; --seed is the only entropy source, and the
effective configuration is echoed to stderr so published numbers can be
reproduced from their log line. Exit codes: 0 success, 1 runtime failure,
2 usage error.
"""

import argparse
import os
import sys

import numpy as np

from . import baselines, evaluation, persist, sgan
from .corpus import Dataset, load_features, ingest, save_features, \
    shuffle_split, select_supervised
from .errors import TypesiftError
from .features import featurize_file
from .ndmath import derive_seed
from .sgan import TrainConfig


def _echo_config(args):
    pairs = ", ".join(f"{k}={v!r}" for k, v in sorted(vars(args).items())
                      if k not in ("func",))
    print(f"typesift config: {pairs}", file=sys.stderr)


def _load_split(path, seed, holdout_fraction=0.8):
    dataset = load_features(path)
    return dataset, shuffle_split(dataset, holdout_fraction, seed)


def _predict_fn(loaded):
    """Batch prediction (labels, probabilities) from any loaded model kind."""
    if loaded.kind == persist.KIND_CLASSIFIER:
        return lambda x: sgan.classify_batch(loaded.classifier, x)
    if loaded.kind == persist.KIND_SGAN_FULL:
        classifier = sgan.classifier_from_trunk(loaded.sgan.trunk)
        return lambda x: sgan.classify_batch(classifier, x)
    if loaded.kind == persist.KIND_KNN:
        n = len(loaded.class_names)
        return lambda x: baselines.knn_predict_proba(loaded.knn, x, n)
    if loaded.kind == persist.KIND_TREE:
        n = len(loaded.class_names)
        return lambda x: baselines.tree_predict_proba(loaded.tree, x, n)
    raise TypesiftError(f"unsupported model kind {loaded.kind}")


def _remap_labels(dataset, class_names):
    """Re-index a dataset's labels into a model's class space by name."""
    index = {name: i for i, name in enumerate(class_names)}
    try:
        labels = np.array([index[dataset.class_names[l]] for l in dataset.labels],
                          dtype=np.int64)
    except KeyError as exc:
        raise TypesiftError(f"cache class {exc} unknown to the model") from None
    return Dataset(dataset.features, labels, list(dataset.paths),
                   list(dataset.extensions), list(class_names))


def cmd_ingest(args):
    dataset, report = ingest(args.dir)
    save_features(dataset, args.out)
    summary = report.summary()
    if summary:
        print(summary, file=sys.stderr)
    if len(dataset) == 0:
        print("warning: no samples ingested", file=sys.stderr)
    print(f"ingested {len(dataset)} samples in {len(dataset.class_names)} classes "
          f"-> {args.out}", file=sys.stderr)
    return 0


def _train_config(args, train_seed):
    return TrainConfig(batch_size=args.batch, max_epochs=args.epochs,
                       lr_dc=args.lr, lr_g=args.lr, seed=train_seed)


def cmd_train(args):
    dataset, split = _load_split(args.features, args.seed)
    if not 1 <= args.labeled <= len(split.train):
        raise TypesiftError(f"--labeled {args.labeled} outside "
                            f"[1, {len(split.train)}]")
    split = select_supervised(split, args.labeled,
                              derive_seed(args.seed, "select", args.labeled))
    config = _train_config(args, derive_seed(args.seed, "train", args.algo,
                                             args.labeled))
    names = dataset.class_names
    history = sgan.TrainHistory()   # knn/tree have no epochs; header-only CSV
    if args.algo == "sgan":
        model = sgan.build(len(names), config.seed)
        classifier, history = sgan.train(model, split, config)
        persist.save(classifier, names, args.out)
        if args.checkpoint:
            opt = sgan.OptimizerStates.for_model(model, config)
            persist.save(model, names, args.checkpoint, optimizer=opt)
    elif args.algo == "mlp":
        classifier, history = baselines.train_mlp(split, config)
        persist.save(classifier, names, args.out)
    elif args.algo == "knn":
        sup = split.supervised()
        model = baselines.knn_fit(sup.features, sup.labels, args.k)
        persist.save(model, names, args.out)
    elif args.algo == "tree":
        sup = split.supervised()
        tree = baselines.tree_fit(sup.features, sup.labels)
        persist.save(tree, names, args.out)
    hist_path = args.out + ".history.csv"
    with open(hist_path, "wb") as fh:
        fh.write(evaluation.render_history_csv(history).encode("utf-8"))
    print(f"history -> {hist_path}", file=sys.stderr)
    print(f"model -> {args.out}", file=sys.stderr)
    return 0


def cmd_evaluate(args):
    loaded = persist.load(args.model)
    predict = _predict_fn(loaded)
    dataset = load_features(args.features)
    if args.holdout:
        split = shuffle_split(dataset, 0.8, args.seed)
        dataset = split.test
    dataset = _remap_labels(dataset, loaded.class_names)
    labels_fn = lambda x: predict(x)[0]
    accuracy, matrix = evaluation.evaluate(labels_fn, dataset)
    os.makedirs(args.out, exist_ok=True)
    evaluation.render_reports(None, {"test": matrix}, {}, args.out)
    metrics = [("accuracy", accuracy)]
    if args.perturb_headers:
        if not args.source_dir:
            raise TypesiftError("--perturb-headers needs --source-dir")
        perturbed, report = evaluation.perturb_headers(dataset, args.source_dir)
        p_acc, p_matrix = evaluation.evaluate(labels_fn, perturbed)
        evaluation.render_reports(None, {"test_perturbed": p_matrix}, {}, args.out)
        for path, reason in report.skipped:
            print(f"skipped {path}: {reason}", file=sys.stderr)
        metrics += [("perturbed_accuracy", p_acc), ("delta", accuracy - p_acc)]
    lines = [f"{name}\t{value:.6f}" for name, value in metrics]
    print("\n".join(lines))
    with open(os.path.join(args.out, "accuracy.csv"), "wb") as fh:
        text = "metric,value\n" + "".join(f"{n},{v:.6f}\n" for n, v in metrics)
        fh.write(text.encode("utf-8"))
    return 0


def cmd_classify(args):
    loaded = persist.load(args.model)
    predict = _predict_fn(loaded)
    names = loaded.class_names
    failures = 0
    for path in args.files:
        try:
            hist = featurize_file(path)
        except (TypesiftError, OSError) as exc:
            print(f"error: {path}: {exc}", file=sys.stderr)
            failures += 1
            continue
        labels, probs = predict(hist[np.newaxis, :])
        label, p = int(labels[0]), probs[0]
        cells = ",".join(format(float(v), ".6f") for v in p)
        print(f"{path}\t{names[label]}\t{p[label]:.6f}\t{cells}")
    return 1 if failures == len(args.files) else 0


def cmd_sweep(args):
    budgets = [int(b) for b in args.budgets.split(",") if b]
    algos = args.algos.split(",") if args.algos else list(evaluation.ALGORITHMS)
    for algo in algos:
        if algo not in evaluation.ALGORITHMS:
            raise TypesiftError(f"unknown algorithm {algo!r}")
    dataset, split = _load_split(args.features, args.seed)
    config = _train_config(args, args.seed)
    sweep = evaluation.run_sweep(split, algos, budgets, args.seeds,
                                 args.seed, config)
    text = evaluation.render_sweep_csv(sweep)
    with open(args.out, "wb") as fh:
        fh.write(text.encode("utf-8"))
    print(f"sweep -> {args.out}", file=sys.stderr)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="typesift",
        description="Identify file types from byte-value distributions.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="featurize a directory tree into a cache")
    p.add_argument("--dir", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("train", help="train one classifier from a feature cache")
    p.add_argument("--features", required=True)
    p.add_argument("--algo", required=True, choices=("sgan", "mlp", "knn", "tree"))
    p.add_argument("--labeled", required=True, type=int)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--epochs", type=int, default=300)
    p.add_argument("--batch", type=int, default=32)
    p.add_argument("--lr", type=float, default=0.0005)
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--out", required=True)
    p.add_argument("--checkpoint", help="also save a resumable sgan_full checkpoint")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="score a model against a feature cache")
    p.add_argument("--model", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--holdout", action="store_true",
                   help="evaluate only the seeded 20%% holdout of the cache")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--perturb-headers", action="store_true")
    p.add_argument("--source-dir")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("classify", help="classify files by content")
    p.add_argument("--model", required=True)
    p.add_argument("files", nargs="+")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("sweep", help="accuracy sweep over supervised budgets")
    p.add_argument("--features", required=True)
    p.add_argument("--budgets", default="2288,1144,500,100,50")
    p.add_argument("--algos", help="comma-separated subset of: "
                                   + ",".join(evaluation.ALGORITHMS))
    p.add_argument("--seeds", type=int, default=3)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--epochs", type=int, default=300)
    p.add_argument("--batch", type=int, default=32)
    p.add_argument("--lr", type=float, default=0.0005)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    _echo_config(args)
    try:
        return args.func(args)
    except (TypesiftError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
