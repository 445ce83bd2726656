import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from hitmatch import QueryVector, build_index, oracle_scores
from hitmatch.fusion import (
    AdTowerTable,
    extended_tower_score,
    field_sum_projection,
    fused_scores,
    ipnn_project,
    pairwise_field_inner_sum,
    top_k,
    tower_scores,
    user_tower,
)

from conftest import random_matrix, random_query


def test_ipnn_examples():
    x = [1.0, 2.0, 3.0]
    assert ipnn_project(x, np.eye(3)).tolist() == x
    assert ipnn_project(x, np.zeros((2, 3))).tolist() == [0.0, 0.0]
    assert ipnn_project(x, [[1, 0, 1], [0, 1, 0]]).tolist() == [4.0, 2.0]
    with pytest.raises(ValueError):
        ipnn_project(x, np.eye(2))


def test_pairwise_examples():
    assert pairwise_field_inner_sum([(1, 0), (0, 1)], [(1, 1)]) == 2.0
    assert np.dot([1, 1], [1, 1]) == 2.0
    assert pairwise_field_inner_sum([(1, 2)], []) == 0.0


def test_pairwise_three_by_two(rng):
    u = rng.standard_normal((3, 4))
    v = rng.standard_normal((2, 4))
    brute = sum(float(np.dot(ui, vj)) for ui, vj in itertools.product(u, v))
    assert pairwise_field_inner_sum(u, v) == pytest.approx(brute, abs=1e-12)
    assert pairwise_field_inner_sum(u, v) == pytest.approx(float(u.sum(0) @ v.sum(0)), abs=1e-9)


@settings(max_examples=200)
@given(st.integers(1, 6), st.integers(1, 6), st.integers(1, 8), st.integers(0, 2**32 - 1))
def test_sum_projection_recovers_all_pairs(m_u, m_v, d, seed):
    rng = np.random.default_rng(seed)
    u = rng.uniform(-3, 3, (m_u, d))
    v = rng.uniform(-3, 3, (m_v, d))
    pu = ipnn_project(u.ravel(), field_sum_projection(m_u, d))
    pv = ipnn_project(v.ravel(), field_sum_projection(m_v, d))
    assert float(pu @ pv) == pytest.approx(pairwise_field_inner_sum(u, v), rel=1e-9, abs=1e-9)


def test_extended_tower_examples():
    assert extended_tower_score([1, 0], [2], [0, 1], [3]) == 6.0
    assert extended_tower_score([0, 0], [0], [0, 0], [0]) == 0.0
    with pytest.raises(ValueError):
        extended_tower_score([1], [2], [0, 1], [3])


@given(
    hnp.arrays(np.float64, 5, elements=st.floats(-10, 10)),
    hnp.arrays(np.float64, 5, elements=st.floats(-10, 10)),
    hnp.arrays(np.float64, 3, elements=st.floats(-10, 10)),
    hnp.arrays(np.float64, 3, elements=st.floats(-10, 10)),
)
def test_extended_tower_splits(h_u, h_a, u, v):
    assert extended_tower_score(h_u, u, h_a, v) == pytest.approx(float(h_u @ h_a) + float(u @ v), abs=1e-12)


def test_fused_worked_example(six_entry):
    idx = build_index(six_entry)
    table = AdTowerTable(np.array([[0.0], [0.0], [0.3]]))
    q = QueryVector.from_pairs({0: 0.5, 1: 2.0, 3: 1.0})
    assert fused_scores(table, [1.0], idx, q)[2] == pytest.approx(3.8)
    empty = fused_scores(table, [1.0], idx, QueryVector.from_pairs({}))
    assert empty.tolist() == tower_scores(table, [1.0]).tolist()
    with pytest.raises(ValueError):
        fused_scores(AdTowerTable(np.zeros((4, 1))), [1.0], idx, q)


def test_fused_matches_brute_force(rng):
    n, m, d_t, n_f, d_f, d_p = 100, 40, 6, 3, 4, 5
    L = random_matrix(rng, n, m, 600, 0.7)
    h_u = rng.standard_normal(d_t)
    u_fields = rng.standard_normal((n_f, d_f))
    W_u = rng.standard_normal((d_p, n_f * d_f))
    h_a = rng.standard_normal((n, d_t))
    v_fields = rng.standard_normal((n, 2, d_f))
    W_v = rng.standard_normal((d_p, 2 * d_f))
    table = AdTowerTable.from_parts(h_a, v_fields, W_v)
    q = random_query(rng, m, 12)
    got = fused_scores(table, user_tower(h_u, u_fields, W_u), build_index(L), q, workers=2)
    u_tilde = W_u @ u_fields.ravel()
    hm = oracle_scores(L, q)
    for a in range(n):
        v_tilde = W_v @ v_fields[a].ravel()
        want = float(h_u @ h_a[a]) + float(u_tilde @ v_tilde) + hm[a]
        assert got[a] == pytest.approx(want, rel=1e-6, abs=1e-6)


def test_top_k_examples():
    assert top_k([0.5, 2.0, 3.5], 2) == [(2, 3.5), (1, 2.0)]
    assert [a for a, _ in top_k([1.0] * 5, 2)] == [0, 1]
    assert [a for a, _ in top_k([0.1, 0.3, 0.2], 3)] == [1, 2, 0]
    for k in (0, 4):
        with pytest.raises(ValueError):
            top_k([0.5, 2.0, 3.5], k)


@given(st.lists(st.integers(-3, 3), min_size=1, max_size=40), st.data())
def test_top_k_matches_sort_and_ignores_permutation(values, data):
    scores = np.array(values, dtype=np.float64)
    k = data.draw(st.integers(1, scores.size))
    want = sorted(range(scores.size), key=lambda a: (-scores[a], a))[:k]
    assert [a for a, _ in top_k(scores, k)] == want
    perm = np.array(data.draw(st.permutations(range(scores.size))))
    shuffled = scores[perm]
    # map back through the permutation; ties then sort by the new ids
    picked = top_k(shuffled, k)
    assert sorted(s for _, s in picked) == sorted(scores[want].tolist())
    assert [a for a, _ in picked] == sorted(range(scores.size), key=lambda a: (-shuffled[a], a))[:k]
