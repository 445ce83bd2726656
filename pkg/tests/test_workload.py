import numpy as np
import pytest

from hitmatch.workload import (
    WorkloadSpec,
    feature_popularity,
    generate_matrix,
    generate_queries,
    generate_requests,
    generate_tower_table,
)


def test_matrix_is_deterministic_and_exact():
    spec = WorkloadSpec(num_ads=5000, num_features=300, nnz=40_000, num_queries=5, query_nnz=10, seed=3)
    a, b = generate_matrix(spec), generate_matrix(spec)
    assert a == b and a.nnz == 40_000
    other = generate_matrix(WorkloadSpec(**{**spec.as_dict(), "seed": 4}))
    assert other != a


def test_skew_zero_columns_within_three_sigma():
    n, m, nnz = 20_000, 400, 400_000
    L = generate_matrix(WorkloadSpec(num_ads=n, num_features=m, nnz=nnz, skew=0.0, num_queries=1, query_nnz=1))
    pops = L.column_populations()
    # each column holds nnz/M distinct ads drawn from N; the spread is at most binomial
    p = nnz / (n * m)
    mean, sigma = n * p, np.sqrt(n * p * (1 - p))
    inside = np.abs(pops - mean) <= 3 * sigma
    assert inside.mean() >= 0.99


def test_skew_orders_popularity():
    L = generate_matrix(WorkloadSpec(num_ads=10_000, num_features=200, nnz=100_000, skew=1.0, num_queries=1, query_nnz=1))
    pops = L.column_populations()
    assert pops[:10].sum() > 5 * pops[-10:].sum()
    p = feature_popularity(5, 1.0)
    assert p.sum() == pytest.approx(1.0) and np.all(np.diff(p) < 0)


@pytest.mark.parametrize("n, m", [(7, 5), (3, 1), (40, 30)])
def test_complete_matrix(n, m):
    L = generate_matrix(WorkloadSpec(num_ads=n, num_features=m, nnz=n * m, num_queries=1, query_nnz=1))
    assert L.nnz == n * m
    assert L.to_dense().all()


def test_dense_regime_exact_count():
    L = generate_matrix(WorkloadSpec(num_ads=50, num_features=40, nnz=1500, skew=1.2, num_queries=1, query_nnz=1))
    assert L.nnz == 1500


def test_infeasible_nnz():
    with pytest.raises(ValueError):
        generate_matrix(WorkloadSpec(num_ads=3, num_features=3, nnz=10, num_queries=1, query_nnz=1))
    with pytest.raises(ValueError):
        WorkloadSpec(num_ads=0)
    with pytest.raises(ValueError):
        WorkloadSpec(skew=-1)


def test_query_shapes_and_weights():
    spec = WorkloadSpec(num_ads=100, num_features=2000, nnz=500, num_queries=1000, query_nnz=50, seed=9)
    qs = generate_queries(spec)
    assert len(qs) == 1000
    for q in qs:
        assert len(q) == 50 and np.all(np.diff(q.features) > 0)
        assert np.all((q.weights >= 0) & (q.weights < 1))
    again = generate_queries(spec)
    assert all(np.array_equal(a.features, b.features) and np.array_equal(a.weights, b.weights) for a, b in zip(qs, again))
    ints = generate_queries(WorkloadSpec(**{**spec.as_dict(), "integer_weights": True}))
    w = np.concatenate([q.weights for q in ints])
    assert set(np.unique(w).tolist()) <= set(range(1, 17))
    with pytest.raises(ValueError):
        generate_queries(WorkloadSpec(num_features=10, query_nnz=11))


def test_queries_do_not_disturb_matrix():
    base = WorkloadSpec(num_ads=1000, num_features=100, nnz=5000, num_queries=3, query_nnz=5)
    more = WorkloadSpec(**{**base.as_dict(), "num_queries": 30})
    assert generate_matrix(base) == generate_matrix(more)


def test_towers_and_requests():
    t = generate_tower_table(20, 8, seed=1)
    assert t.rows.shape == (20, 8) and t.rows.dtype == np.float32
    assert t == generate_tower_table(20, 8, seed=1)
    reqs = generate_requests(5, length=12, num_ads=1000, seed=2)
    assert len(reqs) == 5 and all(len(r) == 12 for r in reqs)
    assert all(np.unique(r.ad_ids).size == 12 for r in reqs)
    with pytest.raises(ValueError):
        generate_requests(1, length=1)
