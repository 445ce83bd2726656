import numpy as np
import pytest

from hitmatch import matrix_from_arrays, matrix_from_entries


def random_matrix(rng, n, m, nnz, skew=0.0):
    """Skewed random L built straight from numpy, independent of the workload generator."""
    nnz = min(nnz, n * m)
    p = np.arange(1, m + 1, dtype=float) ** -skew
    p /= p.sum()
    f = rng.choice(m, size=nnz, p=p)
    a = rng.integers(0, n, size=nnz)
    return matrix_from_arrays(n, m, f, a)


def random_query(rng, m, k, integer=False):
    from hitmatch import QueryVector

    k = min(k, m)
    feats = np.sort(rng.choice(m, size=k, replace=False))
    if integer:
        w = rng.integers(1, 17, size=k).astype(float)
    else:
        w = rng.uniform(-1.0, 2.0, size=k)
    return QueryVector(feats, w)


def brute_scores(L, q):
    """Plain-Python double loop over the entry set."""
    entries = L.entry_set()
    scores = [0.0] * L.num_ads
    for f, w in zip(q.features.tolist(), q.weights.tolist()):
        for a in range(L.num_ads):
            if (f, a) in entries:
                scores[a] += w
    return np.array(scores)


@pytest.fixture
def six_entry():
    # ad0:{0,2}, ad1:{1}, ad2:{0,1,3}
    return matrix_from_entries(3, 4, [(0, 0), (2, 0), (1, 1), (0, 2), (1, 2), (3, 2)])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
