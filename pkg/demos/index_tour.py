# Build a block index on a small matrix and look inside it.
import numpy as np

from hitmatch import build_index, decode_index, matrix_from_arrays, matrix_from_entries
from hitmatch.index import NUM_GROUPS, split_ad_id

# three ads share feature 0 inside the 512..767 range, ad 260 sits alone
L = matrix_from_entries(1024, 3, [(0, 5), (0, 260), (1, 5), (0, 512), (0, 515), (0, 700), (2, 900)])
print("entries:", sorted(L.entry_set()))
print("ad 700 splits into", split_ad_id(700))

idx = build_index(L)
for g in range(NUM_GROUPS):
    blocks = list(idx.blocks(g))
    if not blocks:
        continue
    print(f"group {g}: {len(blocks)} block(s), padded to {2 ** g} bytes each")
    for b in blocks:
        print(f"   feature {b.feature_id}  high {b.header}  residuals {b.residuals}  valid {b.valid_count}")

# the padding bytes are zero, the header count is what keeps them out of the sums
print("index size in bytes:", idx.nbytes)
print("decodes back to L:", decode_index(idx) == L)

# a bigger skewed matrix fills the upper groups
rng = np.random.default_rng(0)
feats = np.minimum(rng.zipf(1.6, 200_000) - 1, 999)
ads = rng.integers(0, 50_000, feats.size)
big = build_index(matrix_from_arrays(50_000, 1000, feats, ads))
print("blocks per group:", [big.block_count(g) for g in range(NUM_GROUPS)])
