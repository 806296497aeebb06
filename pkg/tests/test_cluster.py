import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from paflab.cluster import (
    Partition,
    cluster_recommend,
    estimate_partition,
    oracle_recommend,
    partition_accuracy,
    recommend_by_cluster,
    similarity_matrix,
    true_partitions,
)
from paflab.harness import Method, estimate_many
from paflab.observed import ObservedMatrix
from paflab.synthetic import ModelParams, sample
from paflab.theory import optimal_limit_ber


def block_matrix(values, k):
    return ObservedMatrix.from_dense(np.kron(np.asarray(values), np.ones((k, k), dtype=int)))


def test_noiseless_exact_recovery():
    values = np.array([[0, 1, 1, 0], [1, 1, 0, 0], [0, 0, 1, 1], [1, 0, 1, 0]])
    y = block_matrix(values, 2)
    truth = Partition(np.arange(8) // 2, 4)
    for seed in range(5):
        for axis in ("rows", "columns"):
            est = estimate_partition(y, 2, axis, seed)
            assert partition_accuracy(est, truth) == 1.0
            assert est.cluster_count == 4


def test_all_erased_single_cluster():
    y = ObservedMatrix.from_entries(6, 4, [], [], [])
    with pytest.warns(RuntimeWarning):
        part = estimate_partition(y, 2)
    assert part.cluster_count == 1 and part.degenerate
    np.testing.assert_array_equal(part.assignment, np.zeros(6))


def test_estimate_partition_n256():
    params = ModelParams(256, 16, 0.1, 0.2)
    accs = []
    for seed in range(20):
        lat, y = sample(params, seed)
        rows, cols = true_partitions(lat)
        accs.append(partition_accuracy(estimate_partition(y, 16, "rows", seed), rows))
        accs.append(partition_accuracy(estimate_partition(y, 16, "columns", seed), cols))
    assert np.mean(accs) >= 0.95


@given(st.integers(2, 40).flatmap(lambda n: st.tuples(st.just(n), st.integers(1, n))),
       st.integers(0, 2**31))
def test_estimate_is_a_partition(nk, seed):
    n, k = nk
    rng = np.random.default_rng(seed)
    y = ObservedMatrix.from_dense(rng.integers(-1, 2, size=(n, 7)))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        part = estimate_partition(y, k, "rows", seed)
    assert len(part) == n
    assert part.sizes().min() >= 1
    assert part.sizes().sum() == n


def test_estimate_partition_validation():
    y = block_matrix([[1]], 3)
    with pytest.raises(ValueError):
        estimate_partition(y, 4)
    with pytest.raises(ValueError):
        estimate_partition(y, 1, axis="diagonal")


def test_partition_type():
    p = Partition.from_labels([7, 7, 3, 9, 3])
    np.testing.assert_array_equal(p.assignment, [0, 0, 1, 2, 1])
    assert p.cluster_count == 3
    np.testing.assert_array_equal(p.members(1), [2, 4])
    assert Partition.from_text(p.to_text()).assignment.tolist() == p.assignment.tolist()
    assert p.to_text().splitlines()[2] == "2 1"
    with pytest.raises(ValueError):
        Partition(np.array([0, 2]), 3)
    with pytest.raises(ValueError):
        Partition.from_text("0 0\n0 1\n")


def test_partition_accuracy_relabeling():
    a = Partition(np.array([0, 0, 1, 1]), 2)
    b = Partition(np.array([1, 1, 0, 0]), 2)
    assert partition_accuracy(a, b) == 1.0
    c = Partition(np.array([0, 1, 0, 1]), 2)
    assert partition_accuracy(a, c) == 0.5


def test_similarity_matrix_agrees_with_definition():
    d = np.array([[1, 0, -1], [1, -1, 0], [0, 0, 1]])
    s = similarity_matrix(ObservedMatrix.from_dense(d))
    want = [[sum(1 for a, b in zip(d[i], d[j]) if a >= 0 and b >= 0 and a == b) for j in range(3)]
            for i in range(3)]
    np.testing.assert_array_equal(s, want)


# -- recommend_by_cluster ---------------------------------------------------------

def test_single_column_cluster_uniform():
    y = ObservedMatrix.from_dense([[1, -1, -1, -1], [1, 1, 0, 1]])
    rows = Partition(np.array([0, 0]), 1)
    cols = Partition(np.zeros(4, dtype=int), 1)
    counts = np.zeros(4)
    for seed in range(3000):
        counts[recommend_by_cluster(y, rows, cols, 0, seed=seed).item] += 1
    assert counts[0] == 0
    assert np.all(np.abs(counts[1:] / 3000 - 1 / 3) < 0.04)


def test_block_weight_example():
    # user row cluster {0, 1}; column clusters {0, 1} and {2, 3} hold 3 and 1 ones
    y = ObservedMatrix.from_dense([
        [1, -1, -1, 0],
        [1, 1, 0, 1],
        [0, 0, 1, 1],
        [0, 0, 1, 1],
    ])
    rows = Partition(np.array([0, 0, 1, 1]), 2)
    cols = Partition(np.array([0, 0, 1, 1]), 2)
    for seed in range(20):
        rec = recommend_by_cluster(y, rows, cols, 0, seed=seed)
        assert rec.item == 1
        assert (rec.vote_ones, rec.vote_zeros) == (3, 0)
        np.testing.assert_array_equal(rec.neighbors, [0, 1])


def test_candidate_restricts_eligible_clusters():
    y = ObservedMatrix.from_dense([
        [1, -1, -1, 0],
        [1, 1, 0, 1],
    ])
    rows = Partition(np.array([0, 0]), 1)
    cols = Partition(np.array([0, 0, 1, 1]), 2)
    assert recommend_by_cluster(y, rows, cols, 0, candidates=[2], seed=0).item == 2


def test_partition_cover_checked():
    y = ObservedMatrix.from_dense([[1, -1]])
    with pytest.raises(ValueError):
        recommend_by_cluster(y, Partition(np.array([0, 0]), 1), Partition(np.array([0, 0]), 1), 0)


def test_oracle_noiseless_never_errs_with_evidence():
    params = ModelParams(200, 10, 0.0, 0.4)
    for seed in range(40):
        lat, y = sample(params, seed)
        rec = oracle_recommend(lat, y, 0, seed=seed)
        if rec.vote_ones > 0:
            assert lat.value(0, rec.item) == 1


def test_oracle_determinism():
    lat, y = sample(ModelParams(100, 10, 0.2, 0.3), 5)
    assert oracle_recommend(lat, y, 0, seed=3) == oracle_recommend(lat, y, 0, seed=3)


def test_cluster_recommend_runs():
    lat, y = sample(ModelParams(120, 12, 0.1, 0.2), 2)
    rec = cluster_recommend(y, 12, 0, seed=1)
    assert y.get(0, rec.item) is None
    assert rec == cluster_recommend(y, 12, 0, seed=1)


def test_oracle_vs_paf_phase_one():
    params = ModelParams(512, 32, 0.2, 0.2)
    oracle, paf = estimate_many(params, [Method("oracle"), Method("paf", 32)], 2000, 17)
    assert oracle.ber <= paf.ber + 0.02


def test_oracle_k2_regime_matches_theory():
    # k^2 = n^(alpha - gamma) with gamma = 0.4 puts alpha at 0.4 + 2/3
    gamma = 0.4
    alpha = gamma + 2 * math.log(10) / math.log(1000)
    params = ModelParams(1000, 10, 0.2, alpha)
    pred = optimal_limit_ber(0.2, gamma)
    (stats,) = estimate_many(params, [Method("oracle")], 2000, 23)
    assert pred.lower - 0.05 <= stats.ber <= pred.upper + 0.05
