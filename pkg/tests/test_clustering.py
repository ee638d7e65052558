import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from npsroles.clustering import (
    extract_roles,
    kmeans,
    kmeans_plusplus,
    lloyd,
    misclassification,
    misclassification_bottleneck,
    misclassification_exhaustive,
)
from npsroles.sbm import Assignment, cycle_model, ideal_adjacency, sample_adjacency, shuffle_nodes


def _brute_inertia(x):
    """Optimal 2-means cost over all 2^N labelings."""
    best = np.inf
    for bits in itertools.product([0, 1], repeat=len(x)):
        lab = np.array(bits)
        if lab.min() == lab.max():
            continue
        cost = sum(((x[lab == c] - x[lab == c].mean(0)) ** 2).sum() for c in (0, 1))
        best = min(best, cost)
    return best


class TestKMeans:
    def test_matches_brute_force(self):
        for seed in range(30):
            rng = np.random.default_rng(seed)
            x = rng.standard_normal((8, 2)) + np.repeat([[0, 0], [2, 1]], 4, axis=0)
            res = kmeans(x, 2, restarts=20, seed=seed)
            assert res.inertia == pytest.approx(_brute_inertia(x), rel=1e-10)

    def test_history_non_increasing(self, rng):
        x = rng.standard_normal((200, 3))
        _, _, inertia, n_iter, hist = lloyd(x, kmeans_plusplus(x, 5, rng))
        assert np.all(np.diff(hist) <= 1e-9 * hist[0])
        assert inertia <= hist[-1] + 1e-9 and n_iter == len(hist)

    def test_deterministic(self, rng):
        x = rng.standard_normal((50, 2))
        a = kmeans(x, 3, seed=4)
        b = kmeans(x, 3, seed=4)
        assert a.labels == b.labels and a.inertia == b.inertia

    def test_empty_cluster_reseeded(self):
        x = np.array([[0.0], [0.1], [10.0], [10.1]])
        labels, centers, *_ = lloyd(x, np.array([[0.0], [0.05], [100.0]]))
        assert set(labels.tolist()) == {0, 1, 2}

    def test_duplicate_points(self):
        x = np.zeros((6, 2))
        res = kmeans(x, 2, restarts=3)
        assert res.inertia == 0.0 and len(res.labels) == 6

    def test_validation(self, rng):
        x = rng.standard_normal((5, 2))
        with pytest.raises(ValueError):
            kmeans(x, 6)
        with pytest.raises(ValueError):
            kmeans(x, 2, restarts=0)


class TestMisclassification:
    def test_hand_example(self):
        # two clusters of 10; one node of the first is put in the second
        truth = Assignment(np.repeat([0, 1], 10))
        found = truth.labels.copy()
        found[0] = 1
        score = misclassification(truth, Assignment(found, 2))
        assert score.value == pytest.approx(0.1)
        assert score.matching == (0, 1)

    def test_renamed_labels(self):
        truth = Assignment(np.repeat([0, 1, 2], 4))
        found = Assignment((truth.labels + 1) % 3)
        score = misclassification(truth, found)
        assert score.value == 0.0 and score.matching == (1, 2, 0)

    def test_all_in_one_cluster(self):
        truth = Assignment(np.repeat([0, 1], 5))
        score = misclassification(truth, Assignment(np.zeros(10, dtype=int), 2))
        # C_0 matched to T_0 (10 nodes): 5/5; C_1 matched to the empty T_1: 5/5
        assert score.value == pytest.approx(1.0)

    def test_errors(self):
        truth = Assignment(np.repeat([0, 1], 3))
        with pytest.raises(ValueError):
            misclassification(truth, Assignment(np.zeros(5, dtype=int)))
        with pytest.raises(ValueError):
            misclassification(truth, Assignment(np.arange(6) % 3))

    @settings(max_examples=150, deadline=None)
    @given(st.integers(2, 6), st.integers(0, 2**32 - 1))
    def test_invariance_and_agreement(self, q, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(q, 4 * q + 1))
        truth = Assignment(np.concatenate([np.arange(q), rng.integers(0, q, n - q)]), q)
        found = Assignment(rng.integers(0, q, n), q)
        ref = misclassification_exhaustive(truth, found)
        assert misclassification_bottleneck(truth, found).value == pytest.approx(ref.value, abs=1e-12)
        perm = rng.permutation(q)
        renamed = Assignment(perm[found.labels], q)
        assert misclassification(truth, renamed).value == pytest.approx(ref.value, abs=1e-12)
        # relabelling the truth as well changes nothing
        both = misclassification(Assignment(perm[truth.labels], q), renamed)
        assert both.value == pytest.approx(ref.value, abs=1e-12)
        assert 0.0 <= ref.value

    def test_large_q_uses_bottleneck(self):
        rng = np.random.default_rng(0)
        truth = Assignment(np.repeat(np.arange(10), 3))
        perm = rng.permutation(10)
        score = misclassification(truth, Assignment(perm[truth.labels], 10))
        assert score.value == 0.0
        assert [perm[i] for i in range(10)] == list(score.matching)


class TestExtract:
    def test_ideal_graph_exact(self):
        truth = Assignment(np.repeat([0, 1, 2], 20))
        cyc = np.array([[0, 1, 0], [0, 0, 1], [1, 0, 0]])
        g, t, _ = shuffle_nodes(ideal_adjacency(truth, cyc), truth, seed=1)
        res = extract_roles(g, 3)
        assert misclassification(t, res.assignment).value == 0.0
        assert res.spectrum.estimated_rank == 3 and not res.rank_warning

    @pytest.mark.parametrize("policy, k", [("safe", 1), ("half-gamma", 10), ("fig4-literal", 10)])
    def test_cycle_model_recovery(self, policy, k):
        g, truth = sample_adjacency(cycle_model(0.6), 30, seed=3)
        res = extract_roles(g, 3, policy, k=k, seed=2)
        assert misclassification(truth, res.assignment).value == 0.0
        assert (res.beta > 0) == (k > 1)

    def test_rank_warning(self):
        g, _ = sample_adjacency(cycle_model(0.6), 20, seed=3)
        res = extract_roles(g, 4)
        assert res.rank_warning and res.spectrum.estimated_rank == 3

    def test_single_role(self):
        g, _ = sample_adjacency(cycle_model(0.6), 2, seed=0)
        res = extract_roles(g, 1)
        assert res.assignment.q == 1 and np.all(res.assignment.labels == 0)

    def test_deterministic(self):
        g, _ = sample_adjacency(cycle_model(0.6), 10, seed=7)
        a = extract_roles(g, 3, seed=5, spectrum=False)
        b = extract_roles(g, 3, seed=5, spectrum=False)
        assert a.assignment == b.assignment and a.spectrum is None
