# Full retrieval score: towers, field interactions folded into the towers, plus the index term.
import numpy as np

from hitmatch import build_index
from hitmatch.fusion import (
    AdTowerTable,
    field_sum_projection,
    fused_scores,
    ipnn_project,
    pairwise_field_inner_sum,
    top_k,
    user_tower,
)
from hitmatch.workload import WorkloadSpec, generate_matrix, generate_queries

rng = np.random.default_rng(3)
n_ads, d_tower, d_field = 5000, 16, 8

# pairwise field inner products collapse into one inner product of sums
u = rng.standard_normal((4, d_field))
v = rng.standard_normal((3, d_field))
print("all pairs:", pairwise_field_inner_sum(u, v))
print("sum trick:", float(ipnn_project(u.ravel(), field_sum_projection(4, d_field)) @ ipnn_project(v.ravel(), field_sum_projection(3, d_field))))

# a learned projection instead of the sum, same on both sides
W_u = rng.standard_normal((6, 4 * d_field)) / 4
W_v = rng.standard_normal((6, 3 * d_field)) / 4
ads = AdTowerTable.from_parts(rng.standard_normal((n_ads, d_tower)), rng.standard_normal((n_ads, 3, d_field)), W_v)
user = user_tower(rng.standard_normal(d_tower), u, W_u)
print("tower table:", ads.rows.shape)

spec = WorkloadSpec(num_ads=n_ads, num_features=2000, nnz=60_000, num_queries=1, query_nnz=20, seed=3)
idx = build_index(generate_matrix(spec))
q = generate_queries(spec)[0]

scores = fused_scores(ads, user, idx, q)
print("top 5 ads:")
for ad, s in top_k(scores, 5):
    print(f"   ad {ad:5d}  score {s:8.3f}")

# ties go to the lower ad id
print(top_k([1.0, 3.0, 3.0, 0.5], 2))
