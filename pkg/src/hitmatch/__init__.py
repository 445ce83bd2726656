"""Inverted-index scoring for explicit ad/feature interaction in embedding retrieval."""
from .core import (
    BinaryInteractionMatrix,
    BoundsError,
    QueryVector,
    matrix_from_arrays,
    matrix_from_entries,
    score_vector,
)
from .fusion import (
    AdTowerTable,
    extended_tower_score,
    fused_scores,
    ipnn_project,
    pairwise_field_inner_sum,
    top_k,
)
from .index import GroupedIndex, IndexCorruptError, build_index, decode_index, group_of, split_ad_id
from .oracle import CscMatrix, csc_from_matrix, oracle_scores, spmv_scores
from .query import balanced_assignment, exclusive_scan, hitmatch_scores, plan_query
from .rank_loss import LossConfig, RankedRequest, dcg, delta_ndcg, lambdarank_loss, ndcg
from .workload import WorkloadSpec, generate_matrix, generate_queries

__version__ = "0.1.0"
