import numpy as np
import pytest

from typesift import baselines, corpus, evaluation, sgan
from typesift.errors import EmptySupervisedSetError
from typesift.ndmath import make_rng


def knn_oracle(points, labels, k, query):
    """Exhaustive-scan reference: sort by (distance, insertion order), then
    majority vote with summed-distance and class-index tie-breaks."""
    scored = []
    for i in range(points.shape[0]):
        diff = query - points[i]
        scored.append((float(np.dot(diff, diff)), i))
    scored.sort()
    nearest = scored[:min(k, len(scored))]
    votes, dist_sum = {}, {}
    for dist, i in nearest:
        c = int(labels[i])
        votes[c] = votes.get(c, 0) + 1
        dist_sum[c] = dist_sum.get(c, 0.0) + dist
    best_votes = max(votes.values())
    cands = sorted(c for c, v in votes.items() if v == best_votes)
    return min(cands, key=lambda c: (dist_sum[c], c))


class TestKnn:
    def test_exact_match_wins_k1(self):
        pts = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 0.5]])
        model = baselines.knn_fit(pts, [0, 1, 2], k=1)
        assert baselines.knn_predict(model, np.array([1.0, 1.0])) == 1

    def test_majority_vote_k3(self):
        pts = np.array([[0.0], [0.1], [0.2], [5.0]])
        model = baselines.knn_fit(pts, [0, 0, 1, 1], k=3)
        assert baselines.knn_predict(model, np.array([0.05])) == 0

    def test_distance_tie_broken_by_insertion_order(self):
        pts = np.array([[1.0, 0.0], [1.0, 0.0], [3.0, 0.0]])
        model = baselines.knn_fit(pts, [2, 1, 0], k=1)
        # both stored copies are equidistant; the earlier one wins
        assert baselines.knn_predict(model, np.array([1.0, 0.0])) == 2

    def test_vote_tie_broken_by_summed_distance(self):
        pts = np.array([[0.0], [0.4], [1.0], [1.1]])
        labels = [0, 0, 1, 1]
        # query 0.6: neighbors 0.4(d=.04,c0), 1.0(d=.16,c1), 1.1(d=.25,c1), 0.0(d=.36,c0)
        # votes tie 2-2; class 0 sum .4 > class 1 sum .41 -> class 0 wins
        model = baselines.knn_fit(pts, labels, k=4)
        assert baselines.knn_predict(model, np.array([0.6])) == 0

    def test_vote_and_distance_tie_falls_to_class_index(self):
        pts = np.array([[1.0], [-1.0]])
        model = baselines.knn_fit(pts, [1, 0], k=2)
        assert baselines.knn_predict(model, np.array([0.0])) == 0

    def test_k_larger_than_store_uses_all(self):
        pts = np.array([[0.0], [1.0]])
        model = baselines.knn_fit(pts, [1, 1], k=6)
        assert baselines.knn_predict(model, np.array([10.0])) == 1

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_bruteforce_oracle(self, seed):
        rng = make_rng(seed + 100)
        n = int(rng.integers(20, 120))
        pts = rng.random((n, 256))
        pts[n // 2] = pts[0]                    # exercise exact ties
        labels = rng.integers(int(rng.integers(2, 7)), size=n)
        queries = rng.random((12, 256))
        queries[0] = pts[0]
        for k in range(1, 7):
            model = baselines.knn_fit(pts, labels, k)
            got = baselines.knn_predict_batch(model, queries)
            want = [knn_oracle(model.points, model.labels, k, q) for q in queries]
            assert got.tolist() == want

    def test_proba_labels_match_predict(self):
        rng = make_rng(0)
        pts = rng.random((30, 256))
        labels = rng.integers(3, size=30)
        queries = rng.random((4, 256))
        model = baselines.knn_fit(pts, labels, k=5)
        got_labels, probs = baselines.knn_predict_proba(model, queries, 3)
        np.testing.assert_allclose(probs.sum(axis=1), 1.0, rtol=0, atol=1e-12)
        np.testing.assert_array_equal(got_labels,
                                      baselines.knn_predict_batch(model, queries))

    def test_validation(self):
        with pytest.raises(ValueError):
            baselines.knn_fit(np.empty((0, 4)), [], 1)
        with pytest.raises(ValueError):
            baselines.knn_fit(np.ones((2, 4)), [0, 1], 0)


class TestTree:
    def test_single_class_single_leaf(self):
        pts = make_rng(0).random((10, 4))
        tree = baselines.tree_fit(pts, np.zeros(10, dtype=int))
        assert tree.is_leaf
        assert tree.label == 0
        for i in range(10):
            assert baselines.tree_predict(tree, pts[i]) == 0

    def test_separable_one_feature(self):
        pts = np.array([[0.1], [0.2], [0.3], [0.8], [0.9], [1.0]])
        labels = np.array([0, 0, 0, 1, 1, 1])
        tree = baselines.tree_fit(pts, labels)
        assert not tree.is_leaf
        assert tree.feature == 0
        assert 0.3 < tree.threshold < 0.8
        assert tree.left.is_leaf and tree.right.is_leaf
        got = baselines.tree_predict_batch(tree, pts)
        np.testing.assert_array_equal(got, labels)

    def test_shatters_distinct_points(self):
        rng = make_rng(5)
        pts = rng.random((50, 256))
        labels = rng.integers(4, size=50)
        tree = baselines.tree_fit(pts, labels)
        got = baselines.tree_predict_batch(tree, pts)
        np.testing.assert_array_equal(got, labels)

    def test_leaf_class_counts(self):
        pts = np.array([[0.0], [0.0], [1.0]])
        labels = np.array([0, 0, 1])
        tree = baselines.tree_fit(pts, labels)
        np.testing.assert_array_equal(tree.class_counts, [2, 1])
        np.testing.assert_array_equal(tree.left.class_counts, [2, 0])

    def test_threshold_midpoint_guard_adjacent_floats(self):
        lo = 0.5
        hi = np.nextafter(lo, 1.0)
        pts = np.array([[lo], [hi]])
        tree = baselines.tree_fit(pts, np.array([0, 1]))
        assert baselines.tree_predict(tree, np.array([lo])) == 0
        assert baselines.tree_predict(tree, np.array([hi])) == 1

    def test_identical_points_conflicting_labels_become_leaf(self):
        pts = np.zeros((4, 3))
        labels = np.array([0, 1, 1, 1])
        tree = baselines.tree_fit(pts, labels)
        assert tree.is_leaf
        assert tree.label == 1

    def test_proba_uses_leaf_histogram(self):
        pts = np.array([[0.0], [0.1], [1.0]])
        labels = np.array([0, 1, 1])
        tree = baselines.tree_fit(pts, labels)
        got, probs = baselines.tree_predict_proba(tree, np.array([[1.0]]), 2)
        np.testing.assert_allclose(probs.sum(axis=1), 1.0)


class TestMlp:
    def test_pinned_parameter_count(self):
        net = baselines.build_mlp(11, seed=0)
        assert net.parameter_count() == 304_779

    def test_requires_supervised(self, synth_split):
        bare = corpus.DatasetSplit(train=synth_split.train, test=synth_split.test,
                                   supervised_indices=np.empty(0, np.int64), seed=0)
        with pytest.raises(EmptySupervisedSetError):
            baselines.train_mlp(bare, sgan.TrainConfig(max_epochs=1, seed=0))

    def test_bit_identical_reruns(self, synth_split):
        cfg = sgan.TrainConfig(max_epochs=2, seed=13)
        a_clf, a_hist = baselines.train_mlp(synth_split, cfg)
        b_clf, b_hist = baselines.train_mlp(synth_split, cfg)
        assert a_hist.records == b_hist.records
        for pa, pb in zip(a_clf.parameters(), b_clf.parameters()):
            np.testing.assert_array_equal(pa, pb)

    def test_history_marks_gan_losses_nan(self, synth_split):
        cfg = sgan.TrainConfig(max_epochs=1, seed=13)
        _, hist = baselines.train_mlp(synth_split, cfg)
        r = hist.records[0]
        assert np.isnan(r.j_d_real) and np.isnan(r.j_d_fake) and np.isnan(r.j_g)
        assert np.isfinite(r.j_c)


class TestBudgetMonotonicity:
    """Each baseline should do better fully supervised than with 50 labels."""

    def test_knn_and_tree(self, synth_split):
        small = corpus.select_supervised(synth_split, 50, seed=3)
        for algo in ("knn_k1", "tree"):
            cfg = sgan.TrainConfig(max_epochs=1, seed=3)
            full_fn, _ = evaluation.train_algorithm(algo, synth_split, cfg)
            small_fn, _ = evaluation.train_algorithm(algo, small, cfg)
            full_acc, _ = evaluation.evaluate(full_fn, synth_split.test)
            small_acc, _ = evaluation.evaluate(small_fn, synth_split.test)
            assert full_acc > small_acc, algo

    def test_mlp(self, synth_split):
        small = corpus.select_supervised(synth_split, 50, seed=3)
        cfg = sgan.TrainConfig(max_epochs=25, seed=3)
        full_fn, _ = evaluation.train_algorithm("mlp", synth_split, cfg)
        small_fn, _ = evaluation.train_algorithm("mlp", small, cfg)
        full_acc, _ = evaluation.evaluate(full_fn, synth_split.test)
        small_acc, _ = evaluation.evaluate(small_fn, synth_split.test)
        assert full_acc > small_acc
