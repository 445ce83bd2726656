# Score a query through the index and check it against the plain CSC gather.
import time

import numpy as np

from hitmatch import (
    QueryVector,
    balanced_assignment,
    build_index,
    csc_from_matrix,
    hitmatch_scores,
    matrix_from_entries,
    oracle_scores,
    plan_query,
)
from hitmatch.workload import WorkloadSpec, generate_matrix, generate_queries

spec = WorkloadSpec(num_ads=200_000, num_features=20_000, nnz=2_000_000, num_queries=50, query_nnz=40, seed=1)
L = generate_matrix(spec)
queries = generate_queries(spec)
idx = build_index(L)
csc = csc_from_matrix(L)
print(f"N={L.num_ads} M={L.num_features} nnz={L.nnz}")

# how one query's blocks spread over groups, and how 4 lanes would split them
q = queries[0]
plan = plan_query(idx, q)
print("blocks touched per group:", [gp.total_blocks for gp in plan.groups])
a = balanced_assignment(plan, 4)
print("lane loads in the busiest group:", max((a.lane_loads(g) for g in range(9)), key=lambda x: x.sum()).tolist())

worst = 0.0
for q in queries:
    got = hitmatch_scores(idx, q)
    want = oracle_scores(csc, q)
    worst = max(worst, float(np.max(np.abs(got - want))))
print("max abs difference over", len(queries), "queries:", worst)

out = np.empty(L.num_ads)
for name, fn in [("indexed", lambda q: hitmatch_scores(idx, q, out=out)), ("csc", lambda q: oracle_scores(csc, q, out=out))]:
    fn(queries[0])
    t = time.perf_counter()
    for q in queries:
        fn(q)
    print(f"{name:8s} {len(queries) / (time.perf_counter() - t):8.1f} queries/s")

# tiny hand example
small = matrix_from_entries(3, 4, [(0, 0), (2, 0), (1, 1), (0, 2), (1, 2), (3, 2)])
print(hitmatch_scores(build_index(small), QueryVector.from_pairs({0: 0.5, 1: 2.0, 3: 1.0})))
