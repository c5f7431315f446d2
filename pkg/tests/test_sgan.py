import numpy as np
import pytest

from typesift import corpus, sgan
from typesift.errors import EmptySupervisedSetError
from typesift.ndmath import forward, make_rng


def _snapshot(net):
    return [p.copy() for p in net.parameters()]


def _bit_equal(params_a, params_b):
    return all(np.array_equal(a, b) for a, b in zip(params_a, params_b))


class TestBuild:
    def test_pinned_parameter_counts(self):
        model = sgan.build(11, seed=0)
        trunk, head, gen = model.parameter_counts()
        assert trunk == 304_779
        assert head == 12
        assert gen == 112_480
        assert trunk + head + gen == 417_271

    def test_same_seed_same_weights(self):
        a = sgan.build(11, seed=9)
        b = sgan.build(11, seed=9)
        assert _bit_equal(a.trunk.parameters(), b.trunk.parameters())
        assert _bit_equal(a.gen.parameters(), b.gen.parameters())

    def test_different_seeds_differ(self):
        a = sgan.build(11, seed=1)
        b = sgan.build(11, seed=2)
        assert not np.array_equal(a.trunk.layers[0].weights,
                                  b.trunk.layers[0].weights)

    def test_architecture_shapes(self):
        model = sgan.build(5, seed=0)
        assert [l.n_out for l in model.trunk.layers] == [512, 256, 128, 64, 5]
        assert model.trunk.layers[-1].activation == "linear"
        assert [l.dropout_rate for l in model.trunk.layers] == [0.3] * 4 + [0.0]
        assert model.disc_head.layers[0].activation == "sigmoid"
        assert [l.n_out for l in model.gen.layers] == [32, 64, 128, 256, 256]
        assert model.gen.layers[-1].activation == "sigmoid"
        # dropout follows the 32/64/128 hidden layers only
        assert [l.dropout_rate for l in model.gen.layers] == [0.3] * 3 + [0.0, 0.0]


class TestSampleLatent:
    def test_reproducible(self):
        a = sgan.sample_latent(make_rng(3), 4)
        b = sgan.sample_latent(make_rng(3), 4)
        np.testing.assert_array_equal(a, b)
        assert a.shape == (4, 100)

    def test_standard_normal_moments(self):
        draws = sgan.sample_latent(make_rng(0), 1000).ravel()
        n = draws.size
        assert abs(draws.mean()) <= 3 / np.sqrt(n)
        # var of sample variance ~ 2/(n-1) for a normal population
        assert abs(draws.var(ddof=1) - 1.0) <= 3 * np.sqrt(2 / (n - 1))

    def test_empty_batch(self):
        assert sgan.sample_latent(make_rng(0), 0).shape == (0, 100)


@pytest.fixture()
def small_model(synth_split):
    return sgan.build(len(synth_split.train.class_names), seed=11)


@pytest.fixture()
def opt_and_cfg(small_model):
    cfg = sgan.TrainConfig(max_epochs=1, seed=11)
    return sgan.OptimizerStates.for_model(small_model, cfg), cfg


class TestSteps:
    def test_g_step_freezes_trunk_and_head(self, small_model, opt_and_cfg):
        opt, cfg = opt_and_cfg
        small_model.set_training(True)
        rng = make_rng(0)
        before_trunk = _snapshot(small_model.trunk)
        before_head = _snapshot(small_model.disc_head)
        before_gen = _snapshot(small_model.gen)
        sgan._g_step(small_model, opt, rng, cfg)
        assert _bit_equal(before_trunk, small_model.trunk.parameters())
        assert _bit_equal(before_head, small_model.disc_head.parameters())
        assert not _bit_equal(before_gen, small_model.gen.parameters())

    def test_c_step_moves_shared_trunk_and_d_score(self, small_model,
                                                   opt_and_cfg, synth_split):
        opt, cfg = opt_and_cfg
        small_model.set_training(True)
        rng = make_rng(1)
        probe = synth_split.train.features[:1]

        def d_score():
            small_model.set_training(False)
            logits = forward(small_model.trunk, probe).output
            score = forward(small_model.disc_head, logits).output[0, 0]
            small_model.set_training(True)
            return score

        s0 = d_score()
        sgan._c_step(small_model, opt, synth_split.train.features[:8],
                     synth_split.train.labels[:8], rng)
        s1 = d_score()
        assert s0 != s1      # weight sharing is real
        sgan._g_step(small_model, opt, rng, cfg)
        s2 = d_score()
        assert s1 == s2      # generator step leaves the shared trunk alone

    def test_d_step_on_hand_set_single_units(self):
        # 1-feature trunk logit + sigmoid head, hand-worked BCE backprop
        from typesift.ndmath import DenseLayer, DenseNet
        trunk = DenseNet([DenseLayer(np.array([[2.0]]), np.array([0.1]),
                                     "linear")], training=True)
        head = DenseNet([DenseLayer(np.array([[1.5]]), np.array([-0.2]),
                                    "sigmoid")], training=True)
        gen = DenseNet([DenseLayer(np.array([[0.5]]), np.array([0.0]),
                                   "sigmoid")], training=True)
        model = sgan.SganModel(trunk=trunk, disc_head=head, gen=gen)
        cfg = sgan.TrainConfig(batch_size=2, max_epochs=1, latent_dim=1, seed=0)
        opt = sgan.OptimizerStates.for_model(model, cfg)

        x_real = np.array([[0.8]])
        rng = make_rng(4)
        z = sgan.sample_latent(make_rng(4), 1, 1)     # same draw the step sees
        fake = 1 / (1 + np.exp(-(0.5 * z[0, 0])))

        def d_prob(x):
            logit = 2.0 * x + 0.1
            return 1 / (1 + np.exp(-(1.5 * logit - 0.2)))

        p_real, p_fake = d_prob(0.8), d_prob(fake)
        expect_j_real = -np.log(p_real)
        expect_j_fake = -np.log(1 - p_fake)

        j_real, j_fake = sgan._d_step(model, opt, x_real, rng, cfg)
        assert abs(j_real - expect_j_real) < 1e-12
        assert abs(j_fake - expect_j_fake) < 1e-12

        # hand gradient for the head bias: d(mean BCE)/d(bias) = mean(p - y)
        expected_bias_grad = ((p_real - 1.0) + (p_fake - 0.0)) / 2.0
        m = opt.d.m[-1][0]    # first Adam step: m = (1-b1) * grad
        assert abs(m - 0.1 * expected_bias_grad) < 1e-12


class TestTrainEpoch:
    def test_epoch_updates_all_networks(self, small_model, synth_split):
        cfg = sgan.TrainConfig(max_epochs=1, seed=11)
        opt = sgan.OptimizerStates.for_model(small_model, cfg)
        small_model.set_training(True)
        rng = make_rng(11)
        before_trunk = _snapshot(small_model.trunk)
        before_gen = _snapshot(small_model.gen)
        rec = sgan.train_epoch(small_model, synth_split, cfg, rng, opt)
        assert not _bit_equal(before_trunk, small_model.trunk.parameters())
        assert not _bit_equal(before_gen, small_model.gen.parameters())
        assert 0.0 <= rec.train_accuracy <= 1.0
        for v in (rec.j_d_real, rec.j_d_fake, rec.j_c, rec.j_g):
            assert np.isfinite(v)

    def test_requires_supervised_samples(self, small_model, synth_split):
        cfg = sgan.TrainConfig(max_epochs=1, seed=0)
        opt = sgan.OptimizerStates.for_model(small_model, cfg)
        bare = corpus.DatasetSplit(train=synth_split.train,
                                   test=synth_split.test,
                                   supervised_indices=np.empty(0, np.int64),
                                   seed=0)
        with pytest.raises(EmptySupervisedSetError):
            sgan.train_epoch(small_model, bare, cfg, make_rng(0), opt)


class TestTrain:
    def test_zero_epochs_returns_initial_weights(self, synth_split):
        model = sgan.build(len(synth_split.train.class_names), seed=3)
        initial = sgan.classifier_from_trunk(model.trunk)
        cfg = sgan.TrainConfig(max_epochs=0, seed=3)
        classifier, history = sgan.train(model, synth_split, cfg)
        assert history.records == []
        assert history.best_epoch == 0
        assert _bit_equal(initial.parameters(), classifier.parameters())

    def test_better_than_chance_after_one_epoch(self, synth_split):
        model = sgan.build(len(synth_split.train.class_names), seed=2)
        cfg = sgan.TrainConfig(max_epochs=1, seed=2)
        _, history = sgan.train(model, synth_split, cfg)
        chance = 1.0 / len(synth_split.train.class_names)
        assert history.records[0].train_accuracy > chance

    def test_bit_identical_reruns(self, synth_split):
        runs = []
        for _ in range(2):
            model = sgan.build(len(synth_split.train.class_names), seed=6)
            cfg = sgan.TrainConfig(max_epochs=2, seed=6)
            classifier, history = sgan.train(model, synth_split, cfg)
            runs.append((classifier, history))
        (ca, ha), (cb, hb) = runs
        assert ha.records == hb.records
        assert ha.best_epoch == hb.best_epoch
        assert _bit_equal(ca.parameters(), cb.parameters())

    def test_best_epoch_maximizes_train_accuracy(self, trained_classifier):
        _, history = trained_classifier
        accs = [r.train_accuracy for r in history.records]
        best = history.best_epoch
        assert accs[best - 1] == max(accs)
        # earliest tie wins
        assert all(a < accs[best - 1] for a in accs[:best - 1])

    def test_generator_outputs_in_unit_interval(self, synth_split):
        model = sgan.build(len(synth_split.train.class_names), seed=8)
        fakes = forward(model.gen, sgan.sample_latent(make_rng(0), 16)).output
        assert (fakes > 0).all() and (fakes < 1).all()

    def test_discriminator_output_in_unit_interval(self, small_model):
        x = make_rng(0).random((7, 256))
        logits = forward(small_model.trunk, x).output
        score = forward(small_model.disc_head, logits).output
        assert ((score > 0) & (score < 1)).all()


class TestClassify:
    def test_probabilities_sum_to_one(self, trained_classifier, synth_split):
        classifier, _ = trained_classifier
        label, probs = sgan.classify(classifier, synth_split.test.features[0])
        assert abs(probs.sum() - 1.0) <= 1e-9
        assert label == int(np.argmax(probs))

    def test_deterministic(self, trained_classifier, synth_split):
        classifier, _ = trained_classifier
        x = synth_split.test.features[3]
        a = sgan.classify(classifier, x)
        b = sgan.classify(classifier, x)
        assert a[0] == b[0]
        np.testing.assert_array_equal(a[1], b[1])

    def test_batch_matches_single(self, trained_classifier, synth_split):
        # BLAS may round differently across batch shapes; agreement is to
        # floating-point noise, not bitwise
        classifier, _ = trained_classifier
        x = synth_split.test.features[:5]
        labels, probs = sgan.classify_batch(classifier, x)
        for i in range(5):
            l, p = sgan.classify(classifier, x[i])
            assert l == labels[i]
            np.testing.assert_allclose(p, probs[i], rtol=0, atol=1e-12)


def test_train_config_validation():
    with pytest.raises(ValueError):
        sgan.TrainConfig(batch_size=3)
    with pytest.raises(ValueError):
        sgan.TrainConfig(batch_size=0)
