import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.metrics import adjusted_rand_score, silhouette_samples

from conftest import random_gram, random_shape
from oracles import best_partition_W, brute_force_W, pair_count_ari
from shape_currents.clustering import (
    adjusted_rand_index,
    kernel_kmeans,
    objective,
    point_to_centroid_sq,
    silhouette,
    sweep_k,
)
from shape_currents.errors import EmptyCluster, EmptyGram, InvalidK, LengthMismatch, SingleCluster
from shape_currents.geometry import ShapeAtoms
from shape_currents.rkhs import KernelConfig, distance, gram_matrix, mean_field


def two_groups(m_each=4, gap=50.0, lam=1.0, spread=0.01):
    shapes = []
    for g in range(2):
        for i in range(m_each):
            shapes.append(ShapeAtoms([[g * gap + spread * i, 0.0]], [[1.0, 0.0]]))
    return gram_matrix(shapes, KernelConfig(lam, 2)), [0] * m_each + [1] * m_each


def test_point_to_centroid_examples(rng):
    G = random_gram(rng, 6)
    assert point_to_centroid_sq(G, 3, [3]) == 0.0
    s = random_shape(rng, 2, 10)
    dup = gram_matrix([s, s], KernelConfig(1, 2))
    assert point_to_centroid_sq(dup, 0, [0, 1]) == 0.0
    with pytest.raises(EmptyCluster):
        point_to_centroid_sq(G, 0, [])


def test_point_to_centroid_matches_mean_field(rng):
    cfg = KernelConfig(1.3, 3)
    shapes = [random_shape(rng, 3, 15) for _ in range(3)]
    G = gram_matrix(shapes, cfg)
    mean = mean_field(shapes)
    for l in range(3):
        d = distance(shapes[l], mean, cfg)
        assert point_to_centroid_sq(G, l, range(3)) == pytest.approx(d * d, abs=1e-10)


def test_k_equals_m_and_k_one(rng):
    G = random_gram(rng, 7)
    model = kernel_kmeans(G, 7)
    assert sorted(model.assignment) == list(range(7))
    assert model.W == 0.0
    one = kernel_kmeans(G, 1)
    assert one.W == pytest.approx(np.trace(G) - G.sum() / 7, rel=1e-12)
    assert objective(G, [0] * 7) == pytest.approx(np.trace(G) - G.sum() / 7, rel=1e-12)


def test_recovers_planted_partition_and_brute_force_optimum():
    gram, truth = two_groups()
    model = kernel_kmeans(gram, 2, seed=3)
    assert adjusted_rand_index(truth, model.assignment) == 1.0
    assert model.W == pytest.approx(best_partition_W(gram.entries.tolist(), 2), rel=1e-12, abs=1e-14)


def test_objective_matches_oracle(rng):
    G = random_gram(rng, 8)
    labels = [0, 1, 2, 0, 1, 2, 2, 0]
    assert objective(G, labels) == pytest.approx(brute_force_W(G.tolist(), labels), rel=1e-12)
    assert objective(G, list(range(8))) == 0.0
    with pytest.raises(EmptyCluster):
        objective(G, [0, 2, 2, 0, 2, 2, 2, 0])


def test_optimized_beats_random_assignment(rng):
    G = random_gram(rng, 30)
    model = kernel_kmeans(G, 4, seed=1)
    for _ in range(20):
        labels = rng.permutation(np.arange(30) % 4)
        assert model.W <= objective(G, labels) + 1e-12


@pytest.mark.parametrize("init", ["kmeans++", "random"])
def test_trace_monotone_and_deterministic(rng, init):
    G = random_gram(rng, 40, rank=6)
    a = kernel_kmeans(G, 5, seed=9, init=init)
    b = kernel_kmeans(G, 5, seed=9, init=init)
    assert a == b
    assert all(y <= x + 1e-9 for x, y in zip(a.objective_trace, a.objective_trace[1:]))
    assert a.converged and a.restarts_used == 10
    assert len(set(a.assignment)) == 5


def test_threads_do_not_change_result(rng):
    G = random_gram(rng, 25)
    assert kernel_kmeans(G, 3, seed=4, threads=1) == kernel_kmeans(G, 3, seed=4, threads=4)


def test_provided_init(rng):
    G = random_gram(rng, 10)
    start = [0, 1] * 5
    model = kernel_kmeans(G, 2, init="provided", initial_assignment=start)
    assert model.restarts_used == 1
    assert model.objective_trace[0] == pytest.approx(objective(G, start))


def test_empty_cluster_repair_with_duplicates():
    # all shapes identical: any k > 1 forces the repair path
    G = np.ones((6, 6))
    model = kernel_kmeans(G, 3, seed=0)
    assert len(set(model.assignment)) == 3
    assert model.W == 0.0


def test_max_iter_reports_not_converged(rng):
    G = random_gram(rng, 50, rank=8)
    model = kernel_kmeans(G, 6, seed=0, init="random", max_iter=1, restarts=1)
    assert model.converged is False


def test_invalid_inputs(rng):
    G = random_gram(rng, 4)
    for k in (0, 5):
        with pytest.raises(InvalidK):
            kernel_kmeans(G, k)
    with pytest.raises(EmptyGram):
        kernel_kmeans(np.zeros((0, 0)), 1)


def test_scaling_taus_scales_gram_and_keeps_assignments(rng):
    cfg = KernelConfig(1.0, 2)
    shapes = [random_shape(rng, 2, 10, spread=1.5) for _ in range(12)]
    scaled = [ShapeAtoms(s.centers, 3.0 * s.taus) for s in shapes]
    G, G9 = gram_matrix(shapes, cfg), gram_matrix(scaled, cfg)
    np.testing.assert_allclose(G9.entries, 9.0 * G.entries, rtol=1e-12)
    a, b = kernel_kmeans(G, 3, seed=5), kernel_kmeans(G9, 3, seed=5)
    assert a.assignment == b.assignment
    assert len(a.objective_trace) == len(b.objective_trace)


def test_silhouette_well_separated():
    gram, truth = two_groups(m_each=5, gap=100.0, lam=1.0, spread=0.0)
    rep = silhouette(gram, truth)
    assert rep.mean_silhouette >= 0.99
    assert rep.mean_silhouette == pytest.approx(np.mean(rep.per_shape_silhouette))
    flipped = silhouette(gram, [1 - t for t in truth])
    assert flipped.per_shape_silhouette == rep.per_shape_silhouette


def test_silhouette_singletons_and_errors(rng):
    G = random_gram(rng, 5)
    rep = silhouette(G, list(range(5)))
    assert rep.per_shape_silhouette == [0.0] * 5
    with pytest.raises(SingleCluster):
        silhouette(G, [0] * 5)


def test_silhouette_matches_sklearn(rng):
    G = random_gram(rng, 20, rank=3)
    labels = rng.integers(0, 3, size=20)
    labels[:3] = [0, 1, 2]
    rep = silhouette(G, labels)
    d = np.diag(G)
    D = np.sqrt(np.maximum(d[:, None] + d[None, :] - 2 * G, 0))
    np.fill_diagonal(D, 0)
    np.testing.assert_allclose(rep.per_shape_silhouette, silhouette_samples(D, labels, metric="precomputed"),
                               atol=1e-12)


def test_sweep_rows(rng):
    G = random_gram(rng, 12)
    rows = sweep_k(G, [1])
    assert len(rows) == 1 and rows[0].mean_silhouette is None
    rows = sweep_k(G, range(2, 6))
    assert [r.k for r in rows] == [2, 3, 4, 5]
    assert all(-1 <= r.mean_silhouette <= 1 for r in rows)


def test_sweep_duplicated_dataset(rng):
    shapes = [random_shape(rng, 2, 8) for _ in range(5)]
    G = gram_matrix(shapes + shapes, KernelConfig(1.0, 2))
    (row,) = sweep_k(G, [5])
    assert row.W == pytest.approx(0.0, abs=1e-12)


def test_ari_examples():
    a = [0, 0, 1, 1, 2, 2]
    assert adjusted_rand_index(a, a) == 1.0
    assert adjusted_rand_index(a, [5, 5, 3, 3, 9, 9]) == 1.0
    # oracle: index 20, expected 45*20/45 = 20, max 32.5  ->  (20-20)/(32.5-20) = 0
    assert adjusted_rand_index([0] * 10, [0] * 5 + [1] * 5) == 0.0
    with pytest.raises(LengthMismatch):
        adjusted_rand_index([0, 1], [0])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 3), st.integers(0, 4)), min_size=2, max_size=30))
def test_ari_matches_pair_counting(pairs):
    a, b = [p[0] for p in pairs], [p[1] for p in pairs]
    ours = adjusted_rand_index(a, b)
    assert ours == pytest.approx(adjusted_rand_score(a, b), abs=1e-12)
    if len(set(a)) > 1 or len(set(b)) > 1:
        try:
            ref = pair_count_ari(a, b)
        except ZeroDivisionError:
            return
        assert ours == pytest.approx(ref, abs=1e-12)
