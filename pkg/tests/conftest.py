import pytest

from typesift import corpus, sgan, synthetic


@pytest.fixture(scope="session")
def synth_dataset():
    return synthetic.make_histogram_dataset(n_samples=600, seed=7)


@pytest.fixture(scope="session")
def synth_split(synth_dataset):
    return corpus.shuffle_split(synth_dataset, 0.8, seed=1)


@pytest.fixture(scope="session")
def quick_config():
    return sgan.TrainConfig(max_epochs=3, seed=5)


@pytest.fixture(scope="session")
def trained_classifier(synth_split, quick_config):
    model = sgan.build(len(synth_split.train.class_names), seed=5)
    classifier, history = sgan.train(model, synth_split, quick_config)
    return classifier, history


@pytest.fixture()
def file_corpus(tmp_path):
    """Small on-disk corpus with deterministic contents."""
    root = tmp_path / "corpus"
    synthetic.write_synthetic_corpus(root, n_per_class=21, seed=3)
    return root
