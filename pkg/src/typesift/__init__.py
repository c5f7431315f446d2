"""typesift: file-type identification from byte-value distributions."""

from .corpus import (Dataset, DatasetSplit, LabeledSample, ingest,
                     load_features, save_features, select_supervised,
                     shuffle_split)
from .features import byte_histogram, featurize_bytes, featurize_file, normalize
from .sgan import SganModel, TrainConfig, TrainHistory, build, classify, train

__version__ = "0.1.0"

__all__ = [
    "Dataset", "DatasetSplit", "LabeledSample", "SganModel", "TrainConfig",
    "TrainHistory", "build", "byte_histogram", "classify", "featurize_bytes",
    "featurize_file", "ingest", "load_features", "normalize", "save_features",
    "select_supervised", "shuffle_split", "train",
]
