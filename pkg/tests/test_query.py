import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hitmatch import (
    BoundsError,
    QueryVector,
    balanced_assignment,
    build_index,
    csc_from_matrix,
    exclusive_scan,
    hitmatch_scores,
    matrix_from_entries,
    oracle_scores,
    plan_query,
)
from hitmatch.index import NUM_GROUPS
from hitmatch.query import WorkPlan, GroupPlan, hitmatch_scores_batch, load_balance_search

from conftest import brute_scores, random_matrix, random_query


@pytest.mark.parametrize(
    "lengths, expected", [([3, 1, 4], [0, 3, 4]), ([], []), ([0, 0, 5], [0, 0, 0]), ([7], [0])]
)
def test_exclusive_scan_examples(lengths, expected):
    assert exclusive_scan(lengths).tolist() == expected


@given(st.lists(st.integers(0, 10**6), max_size=300))
def test_exclusive_scan_matches_running_total(lengths):
    expected, acc = [], 0
    for x in lengths:
        expected.append(acc)
        acc += x
    assert exclusive_scan(lengths).tolist() == expected


def test_plan_hand_traced():
    idx = build_index(matrix_from_entries(300, 2, [(0, 5), (0, 260), (1, 5)]))
    plan = plan_query(idx, QueryVector.from_pairs({0: 1.0, 1: 1.0}))
    g0 = plan.groups[0]
    assert g0.key_lengths.tolist() == [2, 1]
    assert g0.key_segments.tolist() == [0, 2]
    assert g0.total_blocks == 3
    assert all(plan.groups[g].total_blocks == 0 for g in range(1, NUM_GROUPS))


def test_plan_absent_and_empty(six_entry):
    idx = build_index(matrix_from_entries(10, 6, [(0, 1)]))
    plan = plan_query(idx, QueryVector.from_pairs({3: 1.0, 5: 2.0}))
    assert all(not gp.key_lengths.any() for gp in plan.groups)
    empty = plan_query(idx, QueryVector.from_pairs({}))
    assert empty.total_blocks == 0 and all(gp.key_lengths.size == 0 for gp in empty.groups)


def _plan_from_lengths(lengths, features=None):
    lengths = np.asarray(lengths, dtype=np.int64)
    segs = exclusive_scan(lengths)
    starts = segs + 100  # arbitrary base offset into the group
    total = int(lengths.sum())
    feats = np.arange(lengths.size) if features is None else np.asarray(features)
    gp = GroupPlan(lengths, segs, starts, total)
    empty = GroupPlan(np.zeros(lengths.size, np.int64), np.zeros(lengths.size, np.int64), starts, 0)
    return WorkPlan(feats, np.ones(lengths.size), (gp,) + (empty,) * (NUM_GROUPS - 1))


def _enumerate_partition(lengths, starts, features, lanes):
    # flatten every (feature, block) item, then deal consecutive chunks to lanes
    items = [(features[j], starts[j] + r) for j, n in enumerate(lengths) for r in range(n)]
    cuts = [len(items) * i // lanes for i in range(lanes + 1)]
    return [items[cuts[i] : cuts[i + 1]] for i in range(lanes)]


def test_merge_path_partition_enumerated():
    plan = _plan_from_lengths([4, 0, 0, 4], features=[10, 11, 12, 13])
    a = balanced_assignment(plan, 4)
    expected = _enumerate_partition([4, 0, 0, 4], [100, 104, 104, 104], [10, 11, 12, 13], 4)
    assert expected == [[(10, 100), (10, 101)], [(10, 102), (10, 103)], [(13, 104), (13, 105)], [(13, 106), (13, 107)]]
    assert [a.lane_items(0, lane) for lane in range(4)] == expected


def test_assignment_small_cases():
    a = balanced_assignment(_plan_from_lengths([2, 1]), 3)
    assert a.lane_loads(0).tolist() == [1, 1, 1]
    b = balanced_assignment(_plan_from_lengths([3, 2]), 2)
    assert sorted(b.lane_loads(0).tolist()) == [2, 3]
    c = balanced_assignment(_plan_from_lengths([1]), 5)
    assert c.lane_loads(0).sum() == 1


@given(st.lists(st.integers(0, 40), max_size=30), st.integers(1, 64))
def test_assignment_balanced_and_exhaustive(lengths, lanes):
    plan = _plan_from_lengths(lengths)
    a = balanced_assignment(plan, lanes)
    loads = a.lane_loads(0)
    assert loads.sum() == sum(lengths)
    assert loads.size == lanes and loads.max() - loads.min() <= 1
    got = [item for lane in range(lanes) for item in a.lane_items(0, lane)]
    starts = exclusive_scan(lengths) + 100
    assert got == [item for chunk in _enumerate_partition(lengths, starts, list(range(len(lengths))), 1) for item in chunk]


def test_load_balance_search_skips_empty_segments():
    segs = exclusive_scan([0, 2, 0, 0, 1])
    assert load_balance_search(segs, 3).tolist() == [1, 1, 4]


def test_worked_example(six_entry):
    idx = build_index(six_entry)
    q = QueryVector.from_pairs({0: 0.5, 1: 2.0, 3: 1.0})
    for workers in (1, 2, 7):
        assert hitmatch_scores(idx, q, workers=workers).tolist() == [0.5, 2.0, 3.5]
    assert not hitmatch_scores(idx, QueryVector.from_pairs({})).any()


def test_padding_does_not_leak_into_residual_zero():
    # block of 3 ads padded to 4; ad 512 itself is in the block, ad 768 is not
    L = matrix_from_entries(1024, 2, [(0, 512), (0, 515), (0, 700), (1, 768), (1, 769), (1, 800)])
    idx = build_index(L)
    assert idx.block_count(2) == 2
    q = QueryVector.from_pairs({0: 1.0, 1: 10.0})
    want = brute_scores(L, q)
    for workers in (1, 3):
        got = hitmatch_scores(idx, q, workers=workers)
        assert got.tolist() == want.tolist()
    assert got[512] == 1.0 and got[768] == 10.0


def test_rejects_out_of_range_feature(six_entry):
    idx = build_index(six_entry)
    with pytest.raises(BoundsError):
        hitmatch_scores(idx, QueryVector.from_pairs({4: 1.0}))


def test_skipping_a_group_breaks_equivalence():
    L = matrix_from_entries(
        2048, 3, [(0, 5)] + [(1, a) for a in range(256, 259)] + [(2, a) for a in range(1024, 1024 + 200)]
    )
    idx = build_index(L)
    q = QueryVector.from_pairs({0: 1.0, 1: 2.0, 2: 3.0})
    want = oracle_scores(L, q)
    assert np.array_equal(hitmatch_scores(idx, q), want)
    for g in range(NUM_GROUPS):
        if idx.block_count(g):
            partial = hitmatch_scores(idx, q, groups=[k for k in range(NUM_GROUPS) if k != g])
            assert not np.array_equal(partial, want)


@settings(max_examples=80, deadline=None)
@given(
    st.integers(0, 2**32 - 1),
    st.sampled_from([3, 90, 1000, 40_000]),
    st.sampled_from([2, 30, 800]),
    st.floats(0, 2.0),
    st.booleans(),
)
def test_oracle_equivalence(seed, n, m, skew, integer):
    rng = np.random.default_rng(seed)
    L = random_matrix(rng, n, m, int(rng.integers(0, min(n * m, 50_000) + 1)), skew)
    idx = build_index(L)
    q = random_query(rng, m, int(rng.integers(0, m + 1)), integer=integer)
    want = oracle_scores(L, q)
    for workers in (1, 2, 5):
        got = hitmatch_scores(idx, q, workers=workers)
        if integer:
            assert np.array_equal(got, want)
        else:
            np.testing.assert_allclose(got, want, rtol=1e-6, atol=1e-9)
    # every weight lands once per stored (feature, ad) pair
    pops = np.diff(csc_from_matrix(L).col_offsets)
    np.testing.assert_allclose(got.sum(), float(q.weights @ pops[q.features]), rtol=1e-9, atol=1e-9)


def test_batch_matches_single(rng):
    L = random_matrix(rng, 3000, 50, 20_000, 1.0)
    idx = build_index(L)
    qs = [random_query(rng, 50, 10) for _ in range(4)]
    batch = hitmatch_scores_batch(idx, qs, workers=1)
    for r, q in enumerate(qs):
        assert np.array_equal(batch[r], hitmatch_scores(idx, q, workers=1))


def test_out_buffer_is_reset(six_entry):
    idx = build_index(six_entry)
    out = np.full(3, 99.0)
    hitmatch_scores(idx, QueryVector.from_pairs({1: 1.0}), out=out)
    assert out.tolist() == [0.0, 1.0, 1.0]
    with pytest.raises(ValueError):
        hitmatch_scores(idx, QueryVector.from_pairs({1: 1.0}), out=np.zeros(4))
